"""Grid filter, pullback sequence and a bootstrap particle filter."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np

from .density import ChartGrid, DensityGrid, TransferOperator
from .manifold import HyperbolicMap
from .observation import Likelihood, ObservationSequence


class DegenerateFilterError(RuntimeError):
    """Pre-normalization mass vanished or became non-finite."""

    def __init__(self, step: int, mass: float, detail: str = ""):
        self.step = int(step)
        self.mass = mass
        super().__init__(f"degenerate filter at step {step}: mass={mass!r} {detail}".strip())


@dataclass
class FilterState:
    density: DensityGrid
    log_normalizer: float = 0.0
    step: int = 0


def _update(values, y, transfer: TransferOperator, lik: Likelihood, grid: ChartGrid, step: int):
    w = lik.weights(y, grid.centers)
    new = w * transfer.apply(values)
    mass = float(new.sum() * grid.cell_volume)
    if not (math.isfinite(mass) and mass > 0.0):
        raise DegenerateFilterError(step, mass)
    return new / mass, mass


def filter_step(state: FilterState, y, transfer: TransferOperator, lik: Likelihood) -> FilterState:
    """One application of the normalized filter operator ``p -> g P p / ||g P p||``."""
    grid = state.density.grid
    vals, mass = _update(state.density.values, y, transfer, lik, grid, state.step + 1)
    return FilterState(DensityGrid(grid, vals),
                       state.log_normalizer + math.log(mass) + lik.log_offset, state.step + 1)


def iter_filter(prior: DensityGrid, ys, transfer: TransferOperator, lik: Likelihood) -> Iterator[FilterState]:
    state = FilterState(prior.normalize(), 0.0, 0)
    yield state
    for y in ys:
        state = filter_step(state, y, transfer, lik)
        yield state


def filter_run(prior: DensityGrid, obs, transfer: TransferOperator, lik: Likelihood) -> List[FilterState]:
    """States after 0, 1, ..., n observations.

    The prior is the law of the state one step before the first observed
    state, so every observation is preceded by one transfer step.
    """
    ys = obs.y_values if isinstance(obs, ObservationSequence) else np.atleast_2d(obs)
    return list(iter_filter(prior, ys, transfer, lik))


def pullback_run(obs_past, n: int, transfer: TransferOperator, lik: Likelihood,
                 grid: Optional[ChartGrid] = None) -> DensityGrid:
    """Normalized ``zeta_n``: n filter steps from the constant density, driven by
    the last n observations of ``obs_past``."""
    ys = obs_past.y_values if isinstance(obs_past, ObservationSequence) else np.atleast_2d(obs_past)
    grid = grid or transfer.grid
    if n < 0 or n > len(ys):
        raise ValueError(f"depth {n} outside the available window of {len(ys)} observations")
    state = FilterState(DensityGrid.uniform(grid), 0.0, 0)
    for y in ys[len(ys) - n:]:
        state = filter_step(state, y, transfer, lik)
    return state.density


def pair_step(p, e, y, transfer: TransferOperator, lik: Likelihood, grid: ChartGrid, step: int):
    """Advance two filters given as ``p`` and the exact difference ``e = q - p``.

    With ``u = g P p``, ``d = g P e`` and masses ``m_u``, ``m_d``, the
    normalized filters satisfy ``p' = u / m_u`` and
    ``q' - p' = (d - p' m_d) / (m_u + m_d)``. Tracking ``e`` directly keeps
    full relative precision when the two filters agree to far below 1e-16.
    """
    w = lik.weights(y, grid.centers)
    u = w * transfer.apply(p)
    d = w * transfer.apply(e)
    vol = grid.cell_volume
    mu = float(u.sum() * vol)
    md = float(d.sum() * vol)
    if not (math.isfinite(mu) and mu > 0.0 and mu + md > 0.0):
        raise DegenerateFilterError(step, mu)
    p_new = u / mu
    e_new = (d - p_new * md) / (mu + md)
    return p_new, e_new


# -- particle filter ---------------------------------------------------------

@dataclass
class ParticleCloud:
    particles: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.particles = np.atleast_2d(np.asarray(self.particles, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.particles) or len(self.weights) == 0:
            raise ValueError("particle cloud must be nonempty with one weight per particle")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def ess(self) -> float:
        return float(1.0 / np.sum(self.weights ** 2))

    @classmethod
    def from_samples(cls, x) -> "ParticleCloud":
        x = np.atleast_2d(x)
        return cls(x, np.full(len(x), 1.0 / len(x)))


def systematic_resample(weights, rng) -> np.ndarray:
    n = len(weights)
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, positions, side="right")


def particle_filter_step(cloud: ParticleCloud, y, fmap: HyperbolicMap, lik: Likelihood,
                         rng, resample_threshold: float = 0.5, step: int = 0) -> ParticleCloud:
    """Bootstrap step: push through f (no jitter), reweight by g, resample if ESS is low."""
    x = fmap._forward(cloud.particles)
    with np.errstate(divide="ignore"):
        logw = np.log(cloud.weights) + lik.log_kernel(y, x)
    top = np.max(logw)
    if not np.isfinite(top):
        raise DegenerateFilterError(step, 0.0, "(all particle weights vanished)")
    w = np.exp(logw - top)
    w /= w.sum()
    out = ParticleCloud(x, w)
    if out.ess < resample_threshold * out.n:
        idx = systematic_resample(w, rng)
        out = ParticleCloud(x[idx], np.full(out.n, 1.0 / out.n))
    return out


def particle_filter_run(x0_samples, ys, fmap: HyperbolicMap, lik: Likelihood, rng,
                        resample_threshold: float = 0.5) -> ParticleCloud:
    cloud = ParticleCloud.from_samples(x0_samples)
    for k, y in enumerate(np.atleast_2d(ys)):
        cloud = particle_filter_step(cloud, y, fmap, lik, rng, resample_threshold, step=k + 1)
    return cloud


def posterior_expectation(state, psi) -> float:
    """Integral of psi under a normalized grid state, density or particle cloud."""
    if isinstance(state, ParticleCloud):
        return float(np.dot(state.weights, psi(state.particles)))
    dens = state.density if isinstance(state, FilterState) else state
    return float(np.dot(psi(dens.grid.centers), dens.values) * dens.grid.cell_volume)


def posterior_mean(state: FilterState) -> np.ndarray:
    """Circular mean on periodic axes, plain mean otherwise."""
    dens = state.density
    c = dens.grid.centers
    w = dens.values * dens.grid.cell_volume
    out = np.empty(c.shape[1])
    for k in range(c.shape[1]):
        if dens.grid.periodic[k]:
            ang = 2 * np.pi * c[:, k]
            out[k] = (np.arctan2(np.dot(w, np.sin(ang)), np.dot(w, np.cos(ang))) / (2 * np.pi)) % 1.0
        else:
            out[k] = np.dot(w, c[:, k])
    return out
