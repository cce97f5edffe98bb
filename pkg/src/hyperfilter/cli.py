"""Command-line front end.

Exit codes: 0 ok, 2 invalid config, 3 missing input, 4 numerical degeneracy.
"""
from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .build import build_lab, cone_environment, make_likelihood, make_priors
from .cones import (D_bound, absorption_table, closed_form_params, image_cone_ratio, invariance_slack,
                    stationary_cone_params, tau_bounds)
from .config import Config, ConfigError, load_config
from .filtering import DegenerateFilterError, filter_run, posterior_expectation, posterior_mean, pullback_run
from .lab import contraction_check, twin_experiment
from .manifold import make_map
from .observation import random_initial_state, simulate_joint

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_DEGENERATE = 0, 2, 3, 4


class MissingInputError(FileNotFoundError):
    pass


def _require(path: Path) -> Path:
    if not path.is_file():
        raise MissingInputError(f"missing upstream file {path}")
    return path


def _seeds(cfg: Config, args) -> list:
    return [args.seed_override] if args.seed_override is not None else list(cfg.experiment.seeds)


def _map(cfg: Config):
    if cfg.map.kind == "cat":
        return make_map("cat")
    return make_map(cfg.map.kind, contraction=cfg.map.contraction, radius=cfg.map.radius)


def _finish(manifest: io.RunManifest, out: Path, paths, t0: float) -> None:
    for p in paths:
        manifest.add(p, out)
    manifest.timings["total_s"] = time.perf_counter() - t0
    manifest.write(out)


# -- subcommands ------------------------------------------------------------------

def cmd_simulate(cfg: Config, args, out: Path, manifest: io.RunManifest) -> list:
    seed = _seeds(cfg, args)[0]
    manifest.seeds = [seed]
    fmap, lik = _map(cfg), make_likelihood(cfg.channel)
    x0 = random_initial_state(fmap, seed, 0, burn_in=cfg.experiment.burn_in)
    obs = simulate_joint(fmap, lik, x0, cfg.experiment.horizon, seed)
    dx = obs.x_truth.shape[1]
    orbit = io.write_csv(out / "orbit.csv", ["step"] + [f"x{i}" for i in range(dx)],
                         ([k, *obs.x_truth[k]] for k in range(len(obs))), [f"seed={seed}", f"map={cfg.map.kind}"])
    return [orbit, io.write_observations(out / "observations.csv", obs)]


def cmd_filter(cfg: Config, args, out: Path, manifest: io.RunManifest) -> list:
    obs = io.read_observations(_require(out / "observations.csv"))
    manifest.seeds = [obs.rng_seed]
    lab = build_lab(cfg)
    prior = make_priors(cfg, lab.grid)[0]
    states = filter_run(prior, obs, lab.transfer, lab.lik)
    d = len(lab.grid.shape)
    cols = ["step", "log_normalizer"] + [f"mean{i}" for i in range(d)] + lab.names
    rows = ([s.step, s.log_normalizer, *posterior_mean(s), *(posterior_expectation(s, psi) for psi in lab.panel)]
            for s in states)
    traj = io.write_csv(out / "filter_trajectory.csv", cols, rows, [f"seed={obs.rng_seed}"])
    post = io.write_density_binary(out / "posterior.bin", states[-1].density)
    return [traj, post]


def cmd_pullback(cfg: Config, args, out: Path, manifest: io.RunManifest) -> list:
    obs = io.read_observations(_require(out / "observations.csv"))
    manifest.seeds = [obs.rng_seed]
    lab = build_lab(cfg)
    depth = min(cfg.experiment.pullback_depth, len(obs))
    P = lab.panel_values()
    vol = lab.grid.cell_volume
    rows = []
    for n in range(depth + 1):
        z = pullback_run(obs, n, lab.transfer, lab.lik)
        rows.append([n, *(P @ z.values * vol)])
    curve = io.write_csv(out / "pullback.csv", ["depth"] + lab.names, rows, [f"seed={obs.rng_seed}"])
    dens = io.write_density_binary(out / "pullback.bin", z)
    half = np.array(rows[depth // 2][1:])
    report = {"seed": obs.rng_seed, "depth": depth, "mu_hat": dict(zip(lab.names, rows[-1][1:])),
              "self_error": float(np.max(np.abs(np.array(rows[-1][1:]) - half)))}
    return [curve, dens, io.write_json(out / "pullback_report.json", report)]


def _twin_worker(payload):
    cfg_dict, seed = payload
    from .config import from_dict
    cfg = from_dict(Config, cfg_dict).validate()
    lab = build_lab(cfg)
    reports = twin_experiment(lab, make_priors(cfg, lab.grid), cfg.experiment.horizon, seed,
                              fit_window=tuple(cfg.experiment.fit_window))
    return [r.to_dict() for r in reports]


def cmd_twin(cfg: Config, args, out: Path, manifest: io.RunManifest) -> list:
    seeds = _seeds(cfg, args)
    payloads = [(cfg.to_dict(), s) for s in seeds]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_twin_worker, payloads))
    else:
        results = [_twin_worker(p) for p in payloads]
    reports = [r for per_seed in results for r in per_seed]
    fits = [r["fit"] for r in reports if r.get("fit")]
    summary = {"n_reports": len(reports),
               "median_beta_tilde": float(np.median([f["beta_tilde"] for f in fits])) if fits else None,
               "median_r2": float(np.median([f["r2"] for f in fits])) if fits else None}
    js = io.write_json(out / "twin_report.json", {"summary": summary, "reports": reports})
    rows = []
    for r in reports:
        for k, step in enumerate(r["steps"]):
            rows.append([r["seed"], r["extra"]["prior_pair"][1], step, r["tv"][k], r["theta_plus"][k],
                         r["panel_gap"][k]])
    csv = io.write_csv(out / "twin_decay.csv", ["seed", "prior", "step", "tv", "theta_plus", "panel_gap"], rows)
    return [js, csv]


def cmd_cone_check(cfg: Config, args, out: Path, manifest: io.RunManifest) -> list:
    seed = _seeds(cfg, args)[0]
    manifest.seeds = [seed]
    lab = build_lab(cfg, shape=cfg.acceptance.birkhoff_shape if cfg.map.kind == "cat" else None)
    env = cone_environment(cfg, lab.fmap, lab.lik, seed)
    st = stationary_cone_params(env)
    obs = lab.simulate(1, seed)
    contraction = contraction_check(lab, obs.y_values[0], cfg.cone.n_pairs, seed, tuple(cfg.cone.amplitude))
    lam = image_cone_ratio(env)
    tau1, tau2 = tau_bounds(lam)
    report = {
        "environment": env.describe(),
        "params": vars(st.params), "constants": st.constants, "tails": st.tails,
        "closed_form": closed_form_params(env) if env.constant else None,
        "slack": invariance_slack(env),
        "absorption": absorption_table(env, cfg.cone.absorption_starts, cfg.cone.absorption_log_range, seed),
        "contraction": contraction,
        "tau": {"lambda": lam, "tau1": tau1, "tau2": tau2, "D_bound": D_bound(st.params.a, lam)},
    }
    return [io.write_json(out / "cone_report.json", report)]


REPORT_INPUTS = ("twin_report.json", "cone_report.json", "pullback_report.json", "filter_trajectory.csv")

GNUPLOT = {
    "twin_decay.csv": ('set datafile separator ","\nset logscale y\nset xlabel "step"\nset ylabel "panel gap"\n'
                       'plot "twin_decay.csv" using 3:6 every ::1 with dots title "twin gap"\n'),
    "pullback.csv": ('set datafile separator ","\nset xlabel "depth"\n'
                     'plot for [c=2:9] "pullback.csv" using 1:c with lines title columnheader(c)\n'),
    "filter_trajectory.csv": ('set datafile separator ","\nset xlabel "step"\n'
                              'plot "filter_trajectory.csv" using 1:2 with lines title "log normalizer"\n'),
}


def cmd_report(cfg: Config, args, out: Path, manifest: io.RunManifest) -> list:
    present = [n for n in REPORT_INPUTS if (out / n).is_file()]
    if not present:
        raise MissingInputError(f"no upstream outputs in {out}")
    summary = {"inputs": present, "config_hash": cfg.hash()}
    if "twin_report.json" in present:
        summary["twin"] = io.read_json(out / "twin_report.json")["summary"]
    if "cone_report.json" in present:
        cr = io.read_json(out / "cone_report.json")
        summary["cone"] = {"params": cr["params"], "max_contraction_ratio": cr["contraction"]["max_ratio"],
                           "d_hat": cr["contraction"]["d_hat"],
                           "absorption_within_bound": all(r["within"] for r in cr["absorption"])}
    if "pullback_report.json" in present:
        summary["pullback"] = io.read_json(out / "pullback_report.json")
    if "filter_trajectory.csv" in present:
        _, cols, data = io.read_csv(out / "filter_trajectory.csv")
        summary["filter"] = {"steps": int(data[-1, 0]), "final": dict(zip(cols[1:], data[-1, 1:].tolist()))}
    paths = [io.write_json(out / "summary.json", summary)]
    if args.plots:
        for csv_name, script in GNUPLOT.items():
            if (out / csv_name).is_file():
                paths.append(io.atomic_write_text(out / f"plot_{Path(csv_name).stem}.gp", script))
    return paths


COMMANDS = {"simulate": cmd_simulate, "filter": cmd_filter, "twin": cmd_twin, "pullback": cmd_pullback,
            "cone-check": cmd_cone_check, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperfilter", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--out-dir", default="out", help="directory for inputs and outputs")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes (twin)")
        sp.add_argument("--plots", action="store_true", help="emit gnuplot scripts (report)")
        sp.add_argument("--seed-override", type=int, default=None, help="replace the configured seed list")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"missing config: {err}", file=sys.stderr)
        return EXIT_MISSING
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = io.RunManifest(args.command, cfg.hash(), _seeds(cfg, args), __version__)
    t0 = time.perf_counter()
    try:
        paths = COMMANDS[args.command](cfg, args, out, manifest)
    except MissingInputError as err:
        print(f"missing input: {err}", file=sys.stderr)
        return EXIT_MISSING
    except DegenerateFilterError as err:
        print(f"numerical degeneracy at step {err.step}: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    _finish(manifest, out, paths, t0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
