"""Memoryless observation channels with certified log-Lipschitz constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .manifold import HyperbolicMap, TWO_PI, circ_diff, wrap01


def bessel_i0(kappa: float) -> float:
    return float(special.i0(kappa))


def seed_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for the counter ``(seed, *stream)``; distinct streams never collide."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(s) for s in stream]]))


class Likelihood:
    """Observation density g(y, x) w.r.t. the reference measure on observations.

    The log density splits into a state-dependent kernel and a constant,
    ``log g = log_kernel + log_const``; ``kernel_max`` bounds the kernel from
    above so that ``exp(log_kernel - kernel_max)`` never overflows. Filters
    use the shifted kernel only, which makes posteriors exactly invariant
    under rescaling of g by constants (see ``scaled``).
    """

    G: float
    log_scale: float = 0.0

    def log_kernel(self, y, x) -> np.ndarray:
        raise NotImplementedError

    @property
    def log_const(self) -> float:
        raise NotImplementedError

    @property
    def kernel_max(self) -> float:
        raise NotImplementedError

    @property
    def log_offset(self) -> float:
        return self.log_const + self.kernel_max

    def log_pdf(self, y, x) -> np.ndarray:
        return self.log_kernel(y, x) + self.log_const

    def pdf(self, y, x) -> np.ndarray:
        return np.exp(self.log_pdf(y, x))

    def weights(self, y, x) -> np.ndarray:
        """g(y, x) / exp(log_offset), in (0, 1]."""
        return np.exp(self.log_kernel(y, x) - self.kernel_max)

    def sample(self, x, rng) -> np.ndarray:
        raise NotImplementedError

    def scaled(self, c: float) -> "Likelihood":
        """The channel c * g (not a probability density unless c = 1)."""
        if not c > 0:
            raise ValueError("scale must be positive")
        out = replace(self)
        out.log_scale = self.log_scale + math.log(c)
        return out


@dataclass
class VonMises(Likelihood):
    """Product of von Mises densities on observed angular coordinates.

    ``g(y, x) = prod_i exp(kappa_i cos 2 pi (y_i - x_{c_i})) / (2 pi I0(kappa_i))``
    w.r.t. arclength on each observation circle.
    """

    kappa: Sequence[float] = (2.0, 2.0)
    observed: Sequence[int] = (0, 1)
    log_scale: float = 0.0
    kind: str = field(default="von_mises", init=False)

    def __post_init__(self):
        self.kappa = tuple(float(k) for k in self.kappa)
        self.observed = tuple(int(c) for c in self.observed)
        if len(self.kappa) != len(self.observed):
            raise ValueError("one kappa per observed coordinate")
        if any(k < 0 for k in self.kappa):
            raise ValueError("kappa must be nonnegative")
        self._k = np.array(self.kappa)
        self._lc = -sum(math.log(TWO_PI * bessel_i0(k)) for k in self.kappa)

    @property
    def G(self) -> float:
        return TWO_PI * float(sum(self.kappa))

    @property
    def log_const(self) -> float:
        return self._lc + self.log_scale

    @property
    def kernel_max(self) -> float:
        return float(self._k.sum())

    @property
    def dim_y(self) -> int:
        return len(self.observed)

    def log_kernel(self, y, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(x.shape[:-1] if x.ndim > 1 else ())
        for i, c in enumerate(self.observed):
            if self.kappa[i] != 0.0:
                out = out + self.kappa[i] * np.cos(TWO_PI * (y[..., i] - x[..., c]))
        return out

    def sample(self, x, rng) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        noise = rng.vonmises(0.0, self._k, size=x.shape[:-1] + (len(self.kappa),)) / TWO_PI
        return wrap01(x[..., list(self.observed)] + noise)

    def describe(self) -> dict:
        return {"kind": self.kind, "kappa": list(self.kappa), "observed": list(self.observed), "G": self.G}


@dataclass
class WrappedGaussian(Likelihood):
    """Wrapped normal on observed circles, truncated to ``2*terms+1`` windings.

    The log-Lipschitz constant has no closed form; ``G`` is a numerical sup of
    ``|d/dx log g|`` on a fine grid, inflated by ``safety``.
    """

    sigma: Sequence[float] = (0.1, 0.1)
    observed: Sequence[int] = (0, 1)
    terms: int = 4
    safety: float = 1.01
    log_scale: float = 0.0
    kind: str = field(default="wrapped_gaussian", init=False)

    def __post_init__(self):
        self.sigma = tuple(float(s) for s in self.sigma)
        self.observed = tuple(int(c) for c in self.observed)
        if any(s <= 0 for s in self.sigma):
            raise ValueError("sigma must be positive")
        u = (np.arange(20000) + 0.5) / 20000
        self._lnorm = []
        gsum = 0.0
        for s in self.sigma:
            lg = self._log_wrapped(u, s)
            self._lnorm.append(-math.log(np.mean(np.exp(lg))))
            gsum += float(np.max(np.abs(np.gradient(lg, u))))
        self._G = gsum * self.safety
        self._kmax = sum(float(np.max(self._log_wrapped(np.array([0.0]), s))) for s in self.sigma)

    def _log_wrapped(self, d, s):
        k = np.arange(-self.terms, self.terms + 1)
        z = (np.asarray(d)[..., None] + k) / s
        return np.logaddexp.reduce(-0.5 * z * z, axis=-1)

    @property
    def G(self) -> float:
        return self._G

    @property
    def log_const(self) -> float:
        return float(sum(self._lnorm)) + self.log_scale

    @property
    def kernel_max(self) -> float:
        return self._kmax

    def log_kernel(self, y, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = 0.0
        for i, c in enumerate(self.observed):
            out = out + self._log_wrapped(circ_diff(y[..., i], x[..., c]), self.sigma[i])
        return np.asarray(out)

    def sample(self, x, rng) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        noise = rng.normal(0.0, self.sigma, size=x.shape[:-1] + (len(self.sigma),))
        return wrap01(x[..., list(self.observed)] + noise)

    def describe(self) -> dict:
        return {"kind": self.kind, "sigma": list(self.sigma), "observed": list(self.observed), "G": self.G}


@dataclass
class TableLikelihood(Likelihood):
    """Discrete observations on a discrete grid: ``table[y, cell]``."""

    table: np.ndarray = None
    log_scale: float = 0.0
    kind: str = field(default="table", init=False)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        if np.any(self.table < 0):
            raise ValueError("table entries must be nonnegative")

    @property
    def G(self) -> float:
        return math.inf

    @property
    def log_const(self) -> float:
        return self.log_scale

    @property
    def kernel_max(self) -> float:
        return 0.0

    def log_kernel(self, y, x) -> np.ndarray:
        cells = np.asarray(x)[..., 0].astype(int)
        with np.errstate(divide="ignore"):
            return np.log(self.table[int(np.asarray(y).ravel()[0]), cells])

    def sample(self, x, rng) -> np.ndarray:
        cell = int(np.asarray(x).ravel()[0])
        p = self.table[:, cell] / self.table[:, cell].sum()
        return np.array([rng.choice(len(p), p=p)], dtype=float)


def lipschitz_bound(lik: Likelihood) -> float:
    """Analytic (or certified numerical) log-Lipschitz constant G.

    The constant is deterministic, so the temperedness requirement on G holds
    trivially.
    """
    return lik.G


def likelihood_eval(lik: Likelihood, y, x) -> np.ndarray:
    return lik.pdf(y, x)


@dataclass
class ObservationSequence:
    y_values: np.ndarray
    x_truth: np.ndarray
    rng_seed: int
    realization: int = 0

    def __post_init__(self):
        self.y_values = np.atleast_2d(np.asarray(self.y_values, dtype=float))
        self.x_truth = np.atleast_2d(np.asarray(self.x_truth, dtype=float))
        if len(self.y_values) != len(self.x_truth):
            raise ValueError("observation and truth lengths differ")

    def __len__(self):
        return len(self.y_values)

    def window(self, start: int, stop: Optional[int] = None) -> "ObservationSequence":
        return ObservationSequence(self.y_values[start:stop], self.x_truth[start:stop],
                                   self.rng_seed, self.realization)


def simulate_joint(fmap: HyperbolicMap, lik: Likelihood, x0, n: int, seed: int,
                   realization: int = 0) -> ObservationSequence:
    """Signal orbit ``x_k = f^k(x0)`` and conditionally independent ``y_k ~ g(., x_k)``.

    Noise comes from the stream ``(seed, realization, 0)`` only.
    """
    if n < 1:
        raise ValueError("need at least one observation")
    x0 = np.asarray(x0, dtype=float)
    if not np.all(fmap.in_domain(x0)):
        raise ValueError("x0 outside Q")
    xs = fmap.orbit(fmap.reduce(x0), n)
    rng = seed_rng(seed, realization, 0)
    ys = np.stack([lik.sample(xs[k], rng) for k in range(n)])
    return ObservationSequence(ys, xs, int(seed), int(realization))


def random_initial_state(fmap: HyperbolicMap, seed: int, realization: int = 0, burn_in: int = 0):
    """Initial point from stream ``(seed, realization, 1)``: uniform on the chart, then burned in."""
    rng = seed_rng(seed, realization, 1)
    if fmap.chart == "torus":
        x = rng.random(2)
    else:
        r = math.sqrt(rng.random())
        phi = TWO_PI * rng.random()
        x = np.array([rng.random(), r * math.cos(phi), r * math.sin(phi)])
    for _ in range(burn_in):
        x = fmap._forward(x)
    return x
