"""Assemble maps, grids, channels and experiment setups from a ``Config``."""
from __future__ import annotations

import numpy as np

from .config import ChannelConfig, Config
from .cones import ConeEnvironment
from .density import ChartGrid, make_transfer
from .lab import Lab, log_trig_prior, solenoid_panel, torus_panel
from .manifold import make_map
from .observation import Likelihood, VonMises, WrappedGaussian, seed_rng


def make_likelihood(ch: ChannelConfig) -> Likelihood:
    if ch.kind == "von_mises":
        return VonMises(tuple(ch.kappa), tuple(ch.observed))
    return WrappedGaussian(tuple(ch.sigma), tuple(ch.observed))


def make_grid(cfg: Config, shape=None) -> ChartGrid:
    chart = "torus" if cfg.map.kind == "cat" else "solid_torus"
    return ChartGrid(chart, shape or cfg.grid.shape)


def build_lab(cfg: Config, shape=None, subsamples=None, channel: ChannelConfig = None) -> Lab:
    fmap = make_map(cfg.map.kind, **({} if cfg.map.kind == "cat" else
                                     {"contraction": cfg.map.contraction, "radius": cfg.map.radius}))
    grid = make_grid(cfg, shape)
    sub = subsamples or cfg.grid.subsamples
    transfer = make_transfer(fmap, grid, cfg.grid.backend, subsamples=sub, shift=cfg.grid.shift)
    lik = make_likelihood(channel or cfg.channel)
    panel = torus_panel(stress=False) if cfg.map.kind == "cat" else solenoid_panel()
    return Lab(fmap, grid, transfer, lik, panel, burn_in=cfg.experiment.burn_in)


def make_priors(cfg: Config, grid: ChartGrid):
    return [log_trig_prior(p.terms, grid) for p in cfg.priors]


def cone_environment(cfg: Config, fmap, lik: Likelihood, seed: int = 0) -> ConeEnvironment:
    """Cone constants for the configured channel.

    With ``G_modulation > 0`` the log-Lipschitz constant becomes the bounded
    (hence tempered) random sequence ``G (1 + m u_k)``, ``u_k`` uniform from
    the per-time stream ``(seed, k)``.
    """
    G0 = lik.G
    m = cfg.channel.G_modulation
    if m > 0:
        def G(k, G0=G0, m=m, seed=seed):
            return G0 * (1.0 + m * seed_rng(seed, 7, k + 2 ** 31).random())
    else:
        G = G0
    c = cfg.cone
    return ConeEnvironment.from_map(fmap, G, delta=c.delta, mu_hat=c.mu_hat, nu=c.nu, N=c.truncation)
