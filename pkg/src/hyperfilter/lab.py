"""Stability experiments: forgetting, pullback limits, covariance and SRB checks.

Two filters on the same observations are always propagated as a base
density and an exact difference (see ``filtering.pair_step``) so that gaps far
below double-precision resolution of the densities stay measurable.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .cones import theta_plus_diff
from .density import ChartGrid, DensityGrid, TestFunction, TransferOperator, integrate
from .filtering import FilterState, filter_step, pair_step, pullback_run
from .manifold import TWO_PI, CatMap, HyperbolicMap, circ_diff
from .observation import Likelihood, ObservationSequence, random_initial_state, simulate_joint


class FitError(ValueError):
    pass


@dataclass
class Lab:
    """Everything an experiment needs: map, grid, transfer backend, channel, panel."""

    fmap: HyperbolicMap
    grid: ChartGrid
    transfer: TransferOperator
    lik: Likelihood
    panel: List[TestFunction]
    burn_in: int = 0

    def simulate(self, n: int, seed: int, realization: int = 0) -> ObservationSequence:
        x0 = random_initial_state(self.fmap, seed, realization, burn_in=self.burn_in)
        return simulate_joint(self.fmap, self.lik, x0, n, seed, realization)

    def panel_values(self) -> np.ndarray:
        return np.stack([psi(self.grid.centers) for psi in self.panel])

    @property
    def names(self) -> List[str]:
        return [psi.name for psi in self.panel]


# -- test functions and priors -------------------------------------------------

def _trig(k1, k2, kind):
    f = np.cos if kind == "cos" else np.sin

    def fn(x):
        return f(TWO_PI * (k1 * x[:, 0] + k2 * x[:, 1]))
    return fn


TORUS_MODES = [(1, 0, "cos"), (1, 0, "sin"), (0, 1, "cos"), (0, 1, "sin"),
               (1, 1, "cos"), (1, -1, "sin"), (2, 1, "cos"), (1, 2, "sin")]


def _mode_name(kind, k1, k2) -> str:
    # CSV-safe: cos_1_m1 for cos(2 pi (x - y))
    return "_".join([kind] + [f"m{-k}" if k < 0 else str(k) for k in (k1, k2)])


def torus_panel(modes=TORUS_MODES, stress: bool = False) -> List[TestFunction]:
    """Trig polynomials of degree <= 3, Lipschitz with constant ``2 pi |k|``."""
    out = []
    for k1, k2, kind in modes:
        if abs(k1) + abs(k2) > 3:
            raise ValueError("panel restricted to degree <= 3")
        out.append(TestFunction(_trig(k1, k2, kind), _mode_name(kind, k1, k2),
                                hoelder=(TWO_PI * math.hypot(k1, k2), 1.0)))
    if stress:
        out.append(stress_function())
    return out


def stress_function(center=(0.5, 0.5)) -> TestFunction:
    """Continuous but not Hoelder at ``center``: ``1 / (1 + |log r|)``."""
    c = np.asarray(center, dtype=float)

    def fn(x):
        r = np.linalg.norm(circ_diff(x[:, :2], c), axis=1)
        with np.errstate(divide="ignore"):
            return np.where(r > 0, 1.0 / (1.0 + np.abs(np.log(np.where(r > 0, r, 1.0)))), 0.0)
    return TestFunction(fn, "stress_log", hoelder=None)


def solenoid_panel() -> List[TestFunction]:
    fns = [("cos_t", lambda x: np.cos(TWO_PI * x[:, 0]), (TWO_PI, 1.0)),
           ("sin_t", lambda x: np.sin(TWO_PI * x[:, 0]), (TWO_PI, 1.0)),
           ("x", lambda x: x[:, 1], (1.0, 1.0)),
           ("y", lambda x: x[:, 2], (1.0, 1.0)),
           ("x2_plus_y2", lambda x: x[:, 1] ** 2 + x[:, 2] ** 2, (2.0, 1.0)),
           ("cos_2t", lambda x: np.cos(2 * TWO_PI * x[:, 0]), (2 * TWO_PI, 1.0))]
    return [TestFunction(f, n, hoelder=h) for n, f, h in fns]


def _random_trig(rng, degree: int = 3):
    terms = [(k1, k2, rng.normal(), rng.uniform(0, TWO_PI))
             for k1 in range(-degree, degree + 1) for k2 in range(0, degree + 1)
             if (k1, k2) != (0, 0) and abs(k1) + abs(k2) <= degree and (k2 > 0 or k1 > 0)]

    def h(x):
        return sum(c * np.cos(TWO_PI * (k1 * x[:, 0] + k2 * x[:, 1]) + ph) for k1, k2, c, ph in terms)
    return h


def sample_smooth_pair(rng, degree: int = 3):
    """Random ``(phi, psi)``: positive ``phi = exp(h1 / 2)`` and ``psi = h2`` with trig polynomials h."""
    h1, h2 = _random_trig(rng, degree), _random_trig(rng, degree)
    return (lambda x: np.exp(0.5 * h1(x))), h2


def duality_check(fmap: HyperbolicMap, grid: ChartGrid, n_pairs: int, seed: int) -> dict:
    """Both sides of ``int psi P phi dm = int (psi o f) phi dm`` by independent quadratures.

    The left side uses the exact pointwise transfer of ``phi``; the right side
    only evaluates the forward map.
    """
    from .density import PointwiseTransfer

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 3]))
    P = PointwiseTransfer(fmap, grid)
    fc = fmap._forward(grid.centers)
    vol = grid.cell_volume
    lhs, rhs = [], []
    for _ in range(n_pairs):
        phi, psi = sample_smooth_pair(rng)
        lhs.append(float(psi(grid.centers) @ P.apply_function(phi)) * vol)
        rhs.append(float(psi(fc) @ phi(grid.centers)) * vol)
    err = np.abs(np.array(lhs) - np.array(rhs))
    return {"lhs": lhs, "rhs": rhs, "errors": err.tolist(), "max_error": float(err.max())}


def log_trig_prior(terms, grid: ChartGrid) -> DensityGrid:
    """Normalized ``exp(sum amp * cos(2 pi k.x + phase))``: log-Lipschitz, strictly positive."""
    x = grid.centers
    h = np.zeros(grid.size)
    for k1, k2, amp, phase in terms:
        h += amp * np.cos(TWO_PI * (k1 * x[:, 0] + k2 * x[:, 1]) + phase)
    return DensityGrid(grid, np.exp(h)).normalize()


def log_lipschitz_constant(terms) -> float:
    return float(sum(abs(amp) * TWO_PI * math.hypot(k1, k2) for k1, k2, amp, _ in terms))


def reference_mean(psi: TestFunction, fmap: HyperbolicMap, resolution: int = 512,
                   transfer: Optional[TransferOperator] = None, iterations: int = 60) -> float:
    """``mu_0(psi)``: Lebesgue midpoint quadrature for the cat map (exact for trig
    polynomials of low degree), otherwise ``int psi P^k 1 dm`` on the transfer grid."""
    if fmap.kind == "cat":
        u = (np.arange(resolution) + 0.5) / resolution
        X, Y = np.meshgrid(u, u, indexing="ij")
        return float(np.mean(psi(np.stack([X.ravel(), Y.ravel()], axis=1))))
    if transfer is None:
        raise ValueError("need a transfer operator to approximate mu_0")
    v = np.ones(transfer.grid.size)
    for _ in range(iterations):
        v = transfer.apply(v)
        v /= v.sum() * transfer.grid.cell_volume
    return integrate(psi, DensityGrid(transfer.grid, v))


# -- distances and rate fits ---------------------------------------------------

def tv_distance(p: DensityGrid, q: DensityGrid) -> float:
    if p.grid != q.grid:
        raise ValueError("densities live on different grids")
    return 0.5 * float(np.abs(p.values - q.values).sum() * p.grid.cell_volume)


@dataclass
class RateFit:
    beta_tilde: float
    intercept: float
    r2: float
    resid_autocorr: float
    window: tuple
    n_points: int
    stderr: float


def fit_rate(log_distances, window: Optional[tuple] = None, steps=None) -> RateFit:
    """OLS fit of ``log d_n = c - beta n``; returns ``beta`` (sign flipped slope).

    ``window = (start, stop)`` selects steps ``start <= n <= stop``.
    """
    y_all = np.asarray(log_distances, dtype=float)
    n_all = np.arange(len(y_all)) if steps is None else np.asarray(steps, dtype=float)
    if window is not None:
        sel = (n_all >= window[0]) & (n_all <= window[1])
        n, y = n_all[sel], y_all[sel]
    else:
        n, y = n_all, y_all
    if len(y) < 5:
        raise FitError(f"need at least 5 points in the fit window, got {len(y)}")
    if not np.all(np.isfinite(y)):
        raise FitError("non-finite log distances in the fit window")
    X = np.column_stack([np.ones_like(n), n])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    rc = resid - resid.mean()
    denom = float(rc @ rc)
    ac = float(rc[1:] @ rc[:-1] / denom) if denom > 0 else 0.0
    dof = max(len(y) - 2, 1)
    sxx = float(((n - n.mean()) ** 2).sum())
    se = math.sqrt(ss_res / dof / sxx) if sxx > 0 else math.inf
    return RateFit(-float(coef[1]), float(coef[0]), r2, ac,
                   (float(n[0]), float(n[-1])), len(y), se)


# -- pair propagation ------------------------------------------------------------

def propagate_pair(lab: Lab, p, e, ys, record: bool = True):
    """Run ``(p, p + e)`` through the observations ``ys``; returns final pair and per-step gaps."""
    P = lab.panel_values()
    vol = lab.grid.cell_volume
    rows = []
    if record:
        rows.append(_pair_row(P, p, e, vol))
    for k, y in enumerate(np.atleast_2d(ys)):
        p, e = pair_step(p, e, y, lab.transfer, lab.lik, lab.grid, k + 1)
        if record:
            rows.append(_pair_row(P, p, e, vol))
    return p, e, rows


def _pair_row(P, p, e, vol):
    gaps = np.abs(P @ e) * vol
    return {"tv": 0.5 * float(np.abs(e).sum() * vol),
            "theta_plus": theta_plus_diff(p, e),
            "psi_gaps": gaps,
            "panel_gap": float(gaps.max())}


# -- experiments -----------------------------------------------------------------

@dataclass
class StabilityReport:
    kind: str
    seed: int
    steps: List[int]
    tv: List[float]
    theta_plus: List[float]
    psi_gaps: Dict[str, List[float]]
    panel_gap: List[float]
    fit: Optional[RateFit] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.fit is not None:
            d["fit"] = asdict(self.fit)
        return d


def twin_experiment(lab: Lab, priors: Sequence[DensityGrid], n: int, seed: int,
                    fit_window=(20, 200), realization: int = 0) -> List[StabilityReport]:
    """Filters from each prior on one observation sequence; one report per prior pair (0, j)."""
    if len(priors) < 2:
        raise ValueError("twin experiment needs at least two priors")
    obs = lab.simulate(n, seed, realization)
    base = priors[0].normalize().values
    reports = []
    for j, q in enumerate(priors[1:], start=1):
        e = q.normalize().values - base
        _, _, rows = propagate_pair(lab, base.copy(), e, obs.y_values)
        rep = _report("twin", seed, rows, lab.names)
        rep.extra = {"prior_pair": [0, j], "realization": realization}
        with np.errstate(divide="ignore"):
            logs = np.log(np.array(rep.panel_gap))
        try:
            rep.fit = fit_rate(logs, window=fit_window)
        except FitError as err:
            rep.extra["fit_error"] = str(err)
        reports.append(rep)
    return reports


def _report(kind, seed, rows, names) -> StabilityReport:
    gaps = np.array([r["psi_gaps"] for r in rows])
    return StabilityReport(kind=kind, seed=int(seed), steps=list(range(len(rows))),
                           tv=[r["tv"] for r in rows], theta_plus=[r["theta_plus"] for r in rows],
                           psi_gaps={nm: gaps[:, i].tolist() for i, nm in enumerate(names)},
                           panel_gap=[r["panel_gap"] for r in rows])


def _pullback_chain(lab: Lab, ys) -> List[np.ndarray]:
    """``zeta_bar_k(T^{-(n-k)} omega)`` for k = 0..n along the window ``ys`` (oldest first)."""
    v = np.ones(lab.grid.size)
    out = [v]
    for k, y in enumerate(np.atleast_2d(ys)):
        st = filter_step(FilterState(DensityGrid(lab.grid, v)), y, lab.transfer, lab.lik)
        v = st.density.values
        out.append(v)
    return out


def cauchy_gap(lab: Lab, seed: int, n_short: int = 40, n_long: int = 80, realization: int = 0) -> dict:
    """``|int psi zeta_bar_long - int psi zeta_bar_short|`` on a shared past window."""
    if not 0 <= n_short < n_long:
        raise ValueError("need 0 <= n_short < n_long")
    obs = lab.simulate(n_long, seed, realization)
    ys = obs.y_values
    head = _pullback_chain(lab, ys[: n_long - n_short])[-1]
    ones = np.ones(lab.grid.size)
    _, _, rows = propagate_pair(lab, ones, head - ones, ys[n_long - n_short:], record=True)
    gaps = rows[-1]["psi_gaps"]
    return {"seed": int(seed), "n_short": n_short, "n_long": n_long,
            "gaps": dict(zip(lab.names, gaps.tolist())), "max_gap": float(gaps.max())}


def covariance_residual(lab: Lab, seed: int, ladder=(10, 20, 40), realization: int = 0) -> dict:
    """``r(n) = max_psi |L_omega mu^(n)_omega (psi) - mu^(n)_{T omega}(psi)|`` with independent windows.

    ``L_omega mu^(n)_omega`` is the depth-(n+1) pullback at ``T omega`` and
    ``mu^(n)_{T omega}`` the depth-n pullback on the window shifted by one,
    both started from the constant density.
    """
    n_max = max(ladder)
    obs = lab.simulate(n_max + 1, seed, realization)
    ys = obs.y_values
    r = {}
    ones = np.ones(lab.grid.size)
    for n in ladder:
        window = ys[len(ys) - n - 1:]
        first = _pullback_chain(lab, window[:1])[-1]
        _, _, rows = propagate_pair(lab, ones, first - ones, window[1:], record=True)
        r[int(n)] = rows[-1]["panel_gap"]
    # consistency: one filter step of the depth-n pullback IS the depth-(n+1) pullback
    n = ladder[0]
    deep = pullback_run(ys[len(ys) - n - 1: len(ys) - 1], n, lab.transfer, lab.lik)
    stepped = filter_step(FilterState(deep), ys[-1], lab.transfer, lab.lik).density.values
    direct = pullback_run(ys[len(ys) - n - 1:], n + 1, lab.transfer, lab.lik).values
    exact = float(np.max(np.abs(lab.panel_values() @ (stepped - direct))) * lab.grid.cell_volume)
    return {"seed": int(seed), "ladder": [int(n) for n in ladder], "r": r, "cocycle_residual": exact}


def forward_vs_pullback(lab: Lab, priors: Sequence[DensityGrid], n_max: int, n_ref: int, seed: int,
                        realization: int = 0) -> dict:
    """Gap ``|int psi L^n_{T^-n omega} phi - int psi mu_hat_omega|`` for n = 0..n_max per prior.

    ``mu_hat_omega`` is the depth-``n_ref`` pullback; its self-error is the
    Cauchy gap against depth ``n_ref // 2``.
    """
    if n_max > n_ref:
        raise ValueError("n_max cannot exceed n_ref")
    obs = lab.simulate(n_ref, seed, realization)
    ys = obs.y_values
    chain = _pullback_chain(lab, ys)  # chain[k] = zeta_bar_k at time -(n_ref - k)
    P = lab.panel_values()
    vol = lab.grid.cell_volume
    out = {"seed": int(seed), "n_ref": n_ref, "steps": list(range(n_max + 1)), "gaps": []}
    for prior in priors:
        phi = prior.normalize().values
        series = []
        for n in range(n_max + 1):
            start = n_ref - n
            ref = chain[start]
            p, e, _ = propagate_pair(lab, phi.copy(), ref - phi, ys[start:], record=False)
            series.append(float(np.max(np.abs(P @ e)) * vol))
        out["gaps"].append(series)
    half = chain[n_ref - n_ref // 2]
    ones = np.ones(lab.grid.size)
    p, e, _ = propagate_pair(lab, ones, half - ones, ys[n_ref - n_ref // 2:], record=False)
    out["self_error"] = float(np.max(np.abs(P @ e)) * vol)
    out["mu_hat"] = dict(zip(lab.names, (P @ chain[-1] * vol).tolist()))
    return out


def expectation_identity_check(lab: Lab, R: int, depth: int, seed: int,
                               reference: Optional[Sequence[float]] = None) -> dict:
    """Average ``int psi d mu_hat_omega`` over R realizations and z-score against ``mu_0(psi)``."""
    P = lab.panel_values()
    vals = np.empty((R, len(lab.panel)))
    for r in range(R):
        obs = lab.simulate(depth, seed, realization=r)
        zeta = pullback_run(obs.y_values, depth, lab.transfer, lab.lik)
        vals[r] = P @ zeta.values * lab.grid.cell_volume
    if reference is None:
        reference = [reference_mean(psi, lab.fmap, transfer=lab.transfer) for psi in lab.panel]
    ref = np.asarray(reference, dtype=float)
    mean = vals.mean(axis=0)
    sd = vals.std(axis=0, ddof=1)
    se = sd / math.sqrt(R)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, (mean - ref) / se, np.where(mean == ref, 0.0, np.inf))
    return {"seed": int(seed), "R": R, "depth": depth, "names": lab.names, "mean": mean.tolist(),
            "reference": ref.tolist(), "sd": sd.tolist(), "se": se.tolist(), "z": z.tolist()}


def attractor_neighborhood(fmap: HyperbolicMap, grid: ChartGrid, seed: int, n_orbits: int = 20000,
                           transient: int = 30, length: int = 200, dilate: int = 1) -> np.ndarray:
    """Cells visited by long test orbits, dilated by ``dilate`` cells (boolean mask)."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 99]))
    if fmap.chart == "torus":
        x = rng.random((n_orbits, 2))
    else:
        x = np.column_stack([rng.random(n_orbits), np.zeros(n_orbits), np.zeros(n_orbits)])
    for _ in range(transient):
        x = fmap._forward(x)
    seen = np.zeros(grid.size, dtype=bool)
    for _ in range(length):
        x = fmap._forward(x)
        i = grid.cell_index(x)
        seen[i[i >= 0]] = True
    mask = seen.copy()
    rng_ = range(-dilate, dilate + 1)
    for off in np.array(np.meshgrid(*[rng_] * len(grid.shape), indexing="ij")).reshape(len(grid.shape), -1).T:
        i = grid.cell_index(grid.centers + off * grid.widths)
        ok = i >= 0
        mask[ok] |= seen[i[ok]]
    return mask


def support_check(lab: Lab, depth: int, seed: int, floor: float = 1e-14, neighborhood=None,
                  realization: int = 0) -> dict:
    """Pullback mass outside the attractor neighbourhood for depths 0..depth.

    The decay ratios are reported for consecutive depths while the outside
    mass is above ``floor``; below it the grid has saturated.
    """
    nb = attractor_neighborhood(lab.fmap, lab.grid, seed) if neighborhood is None else neighborhood
    obs = lab.simulate(depth, seed, realization)
    vol = lab.grid.cell_volume
    masses = []
    for n in range(depth + 1):
        # zeta_bar_n(omega) uses the last n observations
        z = pullback_run(obs.y_values, n, lab.transfer, lab.lik)
        masses.append(float(z.values[~nb].sum() * vol))
    ratios = []
    sat = depth + 1
    for n in range(depth):
        if masses[n + 1] <= floor:
            sat = n + 1
            break
        ratios.append(masses[n + 1] / masses[n])
    return {"seed": int(seed), "outside_mass": masses, "ratios": ratios, "saturation_depth": sat,
            "neighborhood_volume": float(nb.sum() * vol), "neighborhood_cells": int(nb.sum())}


def box_panel(fmap: CatMap, n_functions: int = 20, seed: int = 0, side: float = 0.3) -> List[TestFunction]:
    """Nonnegative functions of the unstable coordinate inside stable/unstable boxes.

    Each is constant along stable segments within its box, and zero outside.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 17]))
    out = []
    for i in range(n_functions):
        c = rng.random(2)
        m = int(rng.integers(0, 3))
        ph = rng.uniform(0, TWO_PI)
        amp = rng.uniform(0.0, 0.9)

        def fn(x, c=c, m=m, ph=ph, amp=amp):
            d = circ_diff(x[:, :2], c)
            s, u = d @ fmap.v_s, d @ fmap.v_u
            inside = (np.abs(s) <= side / 2) & (np.abs(u) <= side / 2)
            return np.where(inside, 1.0 + amp * np.cos(TWO_PI * m * u / side + ph), 0.0)
        out.append(TestFunction(fn, f"box{i}", hoelder=None))
    return out


def abs_continuity_ratio(lab: Lab, panel: Sequence[TestFunction], R: int, depth: int, seed: int) -> dict:
    """Ratios ``int psi d mu_hat_omega / int psi dm`` over a panel and R realizations."""
    vol = lab.grid.cell_volume
    V = np.stack([psi(lab.grid.centers) for psi in panel])
    leb = V.sum(axis=1) * vol
    ratios = np.empty((R, len(panel)))
    for r in range(R):
        obs = lab.simulate(depth, seed, realization=r)
        zeta = pullback_run(obs.y_values, depth, lab.transfer, lab.lik)
        ratios[r] = (V @ zeta.values) * vol / leb
    finite = bool(np.all(np.isfinite(ratios)))
    positive = bool(np.all(ratios > 0))
    C = float(max(ratios.max(), 1.0 / ratios.min())) if positive and finite else math.inf
    return {"seed": int(seed), "R": R, "depth": depth, "ratios": ratios.tolist(), "min": float(ratios.min()),
            "max": float(ratios.max()), "C": C, "finite": finite, "positive": positive,
            "lebesgue": leb.tolist()}


def particle_oracle(lab: Lab, seed: int, steps: int = 30, n_particles: int = 100_000,
                    replicates: int = 50, resample_threshold: float = 0.5) -> dict:
    """Grid filter against ``replicates`` independent bootstrap particle filters.

    Both start from the uniform law one step before the first observed state.
    Reports the grid values, the replicate mean and sd per panel function,
    the standard error of the replicate mean ``sd / sqrt(replicates)``, and
    the number of distinct particles left at the end.
    """
    from .filtering import filter_run, particle_filter_run
    from .observation import seed_rng

    obs = lab.simulate(steps, seed)
    states = filter_run(DensityGrid.uniform(lab.grid), obs, lab.transfer, lab.lik)
    grid_vals = lab.panel_values() @ states[-1].density.values * lab.grid.cell_volume
    est = np.empty((replicates, len(lab.panel)))
    distinct = []
    for r in range(replicates):
        rng = seed_rng(seed, 1000 + r)
        x0 = rng.random((n_particles, lab.fmap.dim)) if lab.fmap.chart == "torus" else None
        if x0 is None:
            raise ValueError("particle oracle is implemented for the torus only")
        cloud = particle_filter_run(x0, obs.y_values, lab.fmap, lab.lik, rng, resample_threshold)
        est[r] = [float(cloud.weights @ psi(cloud.particles)) for psi in lab.panel]
        distinct.append(int(len(np.unique(cloud.particles, axis=0))))
    mean = est.mean(axis=0)
    sd = est.std(axis=0, ddof=1)
    return {"seed": int(seed), "names": lab.names, "grid": grid_vals.tolist(), "pf_mean": mean.tolist(),
            "pf_sd": sd.tolist(), "se_mean": (sd / math.sqrt(replicates)).tolist(),
            "distinct_particles": distinct, "truth": obs.x_truth[-1].tolist()}


def contraction_check(lab: Lab, y, n_pairs: int, seed: int, amplitude=(0.5, 5.0)) -> dict:
    """Hilbert-metric contraction of one filter step ``v -> g(y, .) P v`` on sampled cone pairs.

    ``d_hat`` is the largest theta_plus among the images of all sampled
    vectors, a lower bound on the diameter of the image cone. Each pair is
    checked against ``(1 - exp(-d_hat)) theta_plus(v1, v2)``.
    """
    from .cones import birkhoff_bound, diameter_estimate, sample_log_trig, theta_plus

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 5]))
    w = lab.lik.weights(y, lab.grid.centers)
    L = lambda v: w * lab.transfer.apply(v)
    vecs = [sample_log_trig(lab.grid.centers, rng, amplitude) for _ in range(2 * n_pairs)]
    diam = diameter_estimate(L, vecs)
    k = birkhoff_bound(diam.d_hat)
    before, after = [], []
    for i in range(n_pairs):
        v1, v2 = vecs[2 * i], vecs[2 * i + 1]
        before.append(theta_plus(v1, v2).theta)
        after.append(theta_plus(L(v1), L(v2)).theta)
    before, after = np.array(before), np.array(after)
    return {"seed": int(seed), "d_hat": diam.d_hat, "d_hat_is_lower_bound": True, "bound": k,
            "theta_before": before.tolist(), "theta_after": after.tolist(),
            "ratios": (after / before).tolist(), "max_ratio": float((after / before).max()),
            "max_excess": float((after - k * before).max())}
