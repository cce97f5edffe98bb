"""Pilot runs behind the resolutions and thresholds in configs/acceptance.yaml.

    python3 scripts/calibrate.py ulam        # Ulam -> pointwise L1 convergence on the cat map
    python3 scripts/calibrate.py solenoid    # outside-mass decay vs solenoid resolution
    python3 scripts/calibrate.py covariance  # r(n) ladder on a few seeds
    python3 scripts/calibrate.py particles   # particle filter degeneracy diagnostics
"""
import argparse
import time

import numpy as np

from hyperfilter.build import build_lab
from hyperfilter.config import load_config
from hyperfilter.density import ChartGrid, DensityGrid, PointwiseTransfer, ulam_build
from hyperfilter.filtering import filter_run, particle_filter_run
from hyperfilter.lab import Lab, attractor_neighborhood, covariance_residual, solenoid_panel, support_check
from hyperfilter.manifold import CatMap, Solenoid
from hyperfilter.observation import VonMises, seed_rng


def ulam(args):
    m = CatMap()
    phi = lambda x: np.exp(np.cos(2 * np.pi * x[:, 0]) + 0.5 * np.sin(2 * np.pi * (x[:, 0] + x[:, 1])))
    errs = []
    for n in (16, 32, 64, 128, 256):
        g = ChartGrid("torus", (n, n))
        U = ulam_build(m, g, 8)
        v = DensityGrid.from_function(g, phi).values
        errs.append(float(np.abs(U.apply(v) - PointwiseTransfer(m, g).apply_function(phi)).sum() * g.cell_volume))
        print(f"n={n:4d}  L1 error {errs[-1]:.3e}")
    print("observed orders:", np.round(np.log2(np.array(errs[:-1]) / errs[1:]), 2).tolist())


def solenoid(args):
    sol = Solenoid()
    for shape, sub in [((16, 32, 32), (4, 4, 4)), ((32, 64, 64), (4, 4, 4)), ((32, 64, 64), (8, 4, 4))]:
        t0 = time.perf_counter()
        g = ChartGrid("solid_torus", shape)
        lab = Lab(sol, g, ulam_build(sol, g, sub), VonMises((2.0,), (0,)), solenoid_panel())
        nb = attractor_neighborhood(sol, g, seed=0)
        out = support_check(lab, 10, seed=0, neighborhood=nb)
        print(f"{shape} sub {sub}: ratios {np.round(out['ratios'], 3).tolist()} saturation "
              f"{out['saturation_depth']} nbhd volume {out['neighborhood_volume']:.3f} "
              f"({time.perf_counter() - t0:.1f}s)")


def covariance(args):
    lab = build_lab(load_config(args.config))
    for s in range(args.seeds):
        out = covariance_residual(lab, s, (10, 20, 40))
        print(f"seed {s}: r = {out['r']}  cocycle residual {out['cocycle_residual']:.1e}")


def particles(args):
    cfg = load_config(args.config)
    lab = build_lab(cfg)
    for s in range(args.seeds):
        obs = lab.simulate(cfg.particle.steps, s)
        st = filter_run(DensityGrid.uniform(lab.grid), obs, lab.transfer, lab.lik)[-1]
        rng = seed_rng(s, 1000)
        cloud = particle_filter_run(rng.random((cfg.particle.n_particles, 2)), obs.y_values, lab.fmap, lab.lik,
                                    rng, cfg.particle.resample_threshold)
        distinct = len(np.unique(cloud.particles, axis=0))
        print(f"seed {s}: distinct particles {distinct}, grid max density {st.density.values.max():.3g}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("what", choices=["ulam", "solenoid", "covariance", "particles"])
    ap.add_argument("--config", default="configs/acceptance.yaml")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()
    globals()[args.what](args)


if __name__ == "__main__":
    main()
