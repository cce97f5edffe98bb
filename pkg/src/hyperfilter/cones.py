"""Hilbert projective metrics, leaf cones and the cone-parameter dynamics.

Vectors are sample values of positive functions (on a grid or along a leaf).
An infinite distance is returned as ``math.inf``, never raised, so that
diameter statistics can aggregate boundary pairs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from .density import ConeViolationError, trapezoid_weights
from .manifold import DomainError, HyperbolicMap, StableLeaf

INF = math.inf


@dataclass
class ProjectiveMetricReport:
    theta: float
    alpha: float
    beta: float
    argmin: Optional[tuple] = None
    argmax: Optional[tuple] = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.theta)


def _positive_pair(phi1, phi2):
    p1 = np.asarray(phi1, dtype=float).ravel()
    p2 = np.asarray(phi2, dtype=float).ravel()
    if p1.shape != p2.shape or p1.size == 0:
        raise ValueError("inputs must be nonempty and of equal size")
    if np.any(~(p1 >= 0)) or np.any(~(p2 >= 0)):
        raise ConeViolationError("projective metric needs nonnegative finite inputs")
    return p1, p2


def theta_plus(phi1, phi2) -> ProjectiveMetricReport:
    """``log sup(phi2/phi1) / inf(phi2/phi1)`` over the common sample set.

    Exact zeros give the infinite marker; negative or NaN entries raise.
    """
    p1, p2 = _positive_pair(phi1, phi2)
    if np.any(p1 == 0) or np.any(p2 == 0) or not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
        return ProjectiveMetricReport(INF, 0.0, INF)
    r = np.log(p2) - np.log(p1)
    i, j = int(np.argmin(r)), int(np.argmax(r))
    return ProjectiveMetricReport(float(r[j] - r[i]), float(np.exp(r[i])), float(np.exp(r[j])), (i,), (j,))


def theta_plus_diff(p, e) -> float:
    """``theta_plus(p, p + e)`` from the difference ``e`` (full relative precision)."""
    p = np.asarray(p, dtype=float).ravel()
    e = np.asarray(e, dtype=float).ravel()
    if np.any(~(p > 0)) or np.any(~(p + e > 0)):
        return INF
    r = e / p
    return float(np.log1p(r.max()) - np.log1p(r.min()))


def _leaf_distances(leaf_or_d) -> np.ndarray:
    if isinstance(leaf_or_d, StableLeaf):
        return leaf_or_d.pair_distances()
    d = np.asarray(leaf_or_d, dtype=float)
    if d.ndim == 1:
        return np.abs(d[:, None] - d[None, :])
    return d


def theta_holder(phi1, phi2, leaf, a: float, mu: float) -> ProjectiveMetricReport:
    """Projective metric of the cone ``D(a, mu)`` on leaf samples, O(n^2) in pairs.

    ``alpha`` is the inf over points of ``phi2/phi1`` and over ordered pairs
    of ``(E phi2(x) - phi2(y)) / (E phi1(x) - phi1(y))`` with
    ``E = exp(a d(x,y)^mu)``; ``beta`` the corresponding sup. A nonpositive
    denominator means the input is not strictly inside the cone and gives the
    infinite marker.
    """
    p1, p2 = _positive_pair(phi1, phi2)
    if np.any(p1 == 0) or np.any(p2 == 0):
        return ProjectiveMetricReport(INF, 0.0, INF)
    d = _leaf_distances(leaf)
    n = len(p1)
    if d.shape != (n, n):
        raise ValueError("distance matrix does not match the samples")
    E = np.exp(a * d ** mu)
    off = ~np.eye(n, dtype=bool)
    den = E * p1[:, None] - p1[None, :]
    num = E * p2[:, None] - p2[None, :]
    if np.any(den[off] <= 0) or np.any(num[off] <= 0):
        return ProjectiveMetricReport(INF, 0.0, INF)
    pair = np.where(off, num / np.where(off, den, 1.0), np.nan)
    point = p2 / p1
    lo_pair, hi_pair = np.nanmin(pair), np.nanmax(pair)
    alpha = min(point.min(), lo_pair)
    beta = max(point.max(), hi_pair)
    if alpha == point.min():
        amin = (int(np.argmin(point)),)
    else:
        amin = tuple(int(v) for v in np.unravel_index(np.nanargmin(pair), pair.shape))
    if beta == point.max():
        amax = (int(np.argmax(point)),)
    else:
        amax = tuple(int(v) for v in np.unravel_index(np.nanargmax(pair), pair.shape))
    return ProjectiveMetricReport(float(math.log(beta / alpha)), float(alpha), float(beta), amin, amax)


@dataclass
class MembershipReport:
    member: bool
    excess: float  # max of log rho(x) - log rho(y) - a d^mu over pairs
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.member


def holder_membership(rho, leaf, a: float, mu: float, slack: float = 1e-12) -> MembershipReport:
    """``rho > 0`` and ``rho(x) <= rho(y) exp(a d(x,y)^mu)`` on all sample pairs."""
    r = np.asarray(rho, dtype=float).ravel()
    if np.any(~(r > 0)):
        bad = int(np.argmax(~(r > 0)))
        return MembershipReport(False, INF, (bad,))
    d = _leaf_distances(leaf)
    lr = np.log(r)
    excess = lr[:, None] - lr[None, :] - a * d ** mu
    np.fill_diagonal(excess, -INF)
    k = np.unravel_index(np.argmax(excess), excess.shape)
    worst = float(excess[k])
    return MembershipReport(worst <= slack, worst, (int(k[0]), int(k[1])))


def set_A_membership(phi, leaf: StableLeaf, a: float, mu: float) -> tuple:
    """Exact sample-level test of ``int_gamma phi rho > 0`` for all rho in ``D(a, mu)``.

    Solves ``min sum w phi rho`` over the closed discrete cone with
    ``sum w rho = 1`` (trapezoid weights ``w``). Returns ``(member, minimum)``.
    """
    f = np.asarray(phi, dtype=float).ravel()
    w = trapezoid_weights(leaf.offsets)
    n = len(f)
    d = leaf.pair_distances()
    E = np.exp(a * d ** mu)
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    A = np.zeros((len(ii), n))
    A[np.arange(len(ii)), ii] = 1.0
    A[np.arange(len(ii)), jj] = -E[ii, jj]
    res = linprog(w * f, A_ub=A, b_ub=np.zeros(len(ii)), A_eq=w[None, :], b_eq=[1.0],
                  bounds=[(0, None)] * n, method="highs")
    if res.status != 0:
        raise RuntimeError(f"membership LP failed: {res.message}")
    return bool(res.fun > 0), float(res.fun)


# -- Birkhoff contraction ------------------------------------------------------

def birkhoff_bound(D: float) -> float:
    """Contraction coefficient ``1 - exp(-D)`` for an image of diameter D."""
    if D < 0 or math.isnan(D):
        raise ValueError("diameter must be nonnegative")
    if math.isinf(D):
        return 1.0
    return -math.expm1(-D)


def _tau_ratio(s, lam):
    # (z - z^lam) / (z - z^-lam) with z = e^s, written to stay accurate near s = 0
    return math.exp(2 * lam * s) * math.expm1((1 - lam) * s) / math.expm1((1 + lam) * s)


def tau_bounds(lam: float, s_max: float = 60.0) -> tuple:
    """``tau1 = inf_{z>1} (z - z^lam)/(z - z^-lam)`` and ``tau2 = sup`` of the reciprocal.

    One-dimensional bounded minimization in ``s = log z``; the endpoint
    values (limits at ``z -> 1`` and ``z -> inf``) are included as candidates
    because the extremum of this ratio sits at the boundary.
    """
    if not 0 <= lam < 1:
        raise ValueError("lambda must lie in [0, 1)")
    lo = 1e-9
    f = lambda s: _tau_ratio(s, lam)
    res = minimize_scalar(f, bounds=(lo, s_max), method="bounded", options={"xatol": 1e-10})
    tau1 = min(f(lo), float(res.fun), f(s_max))
    g = lambda s: -1.0 / _tau_ratio(s, lam)
    res2 = minimize_scalar(g, bounds=(lo, s_max), method="bounded", options={"xatol": 1e-10})
    tau2 = max(-g(lo), -float(res2.fun), -g(s_max))
    return tau1, tau2


def D_bound(a: float, lam: float) -> float:
    """Analytic diameter bound ``4a + log(tau2/tau1)``.

    ``lam`` is the ratio of the image cone's constant to ``a``, not a
    contraction rate of the map.
    """
    t1, t2 = tau_bounds(lam)
    return 4.0 * a + math.log(t2 / t1)


def pairwise_theta_plus(vectors) -> np.ndarray:
    """Matrix of theta_plus between rows of a positive 2-D array."""
    V = np.asarray(vectors, dtype=float)
    if np.any(~(V >= 0)):
        raise ConeViolationError("vectors must be nonnegative")
    m = len(V)
    out = np.zeros((m, m))
    with np.errstate(divide="ignore"):
        L = np.log(V)
    for i in range(m):
        diff = L[i + 1:] - L[i]
        hi = diff.max(axis=1)
        lo = diff.min(axis=1)
        th = hi - lo
        th[~np.isfinite(th)] = INF
        out[i, i + 1:] = th
        out[i + 1:, i] = th
    return out


@dataclass
class DiameterReport:
    d_hat: float  # max sampled image distance: a lower bound on the true diameter
    n_images: int
    witness: tuple
    analytic: Optional[float] = None
    is_lower_bound: bool = True


def diameter_estimate(operator: Callable, samples, analytic: Optional[float] = None) -> DiameterReport:
    """Largest theta_plus among the images of ``samples`` under ``operator``."""
    images = np.stack([np.asarray(operator(s), dtype=float) for s in samples])
    M = pairwise_theta_plus(images)
    k = np.unravel_index(np.argmax(M), M.shape)
    return DiameterReport(float(M[k]), len(images), (int(k[0]), int(k[1])), analytic)


def positive_matrix_diameter(M) -> float:
    """Exact theta_plus diameter of ``M`` applied to the nonnegative orthant.

    The image cone is spanned by the columns, so the diameter is the largest
    distance between two columns (infinite if any column has a zero).
    """
    M = np.asarray(M, dtype=float)
    return float(pairwise_theta_plus(M.T).max()) if M.shape[1] > 1 else 0.0


def sample_log_trig(points, rng, amplitude=(0.5, 5.0), degree: int = 3) -> np.ndarray:
    """Positive vector ``exp(A * h)`` with h a random torus trig polynomial, ``max|h| <= 1``."""
    x = np.atleast_2d(points)
    A = rng.uniform(*amplitude)
    h = np.zeros(len(x))
    n_terms = 0
    for k1 in range(-degree, degree + 1):
        for k2 in range(0, degree + 1):
            if (k1, k2) == (0, 0) or abs(k1) + abs(k2) > degree:
                continue
            c = rng.normal()
            ph = rng.uniform(0, 2 * np.pi)
            h += c * np.cos(2 * np.pi * (k1 * x[:, 0] + k2 * x[:, 1]) + ph)
            n_terms += 1
    h /= max(np.abs(h).max(), 1e-300)
    return np.exp(A * h)


def sample_leaf_density(leaf: StableLeaf, a: float, rng, fill: float = 0.9, modes: int = 4) -> np.ndarray:
    """A member of ``D(a, mu, leaf)`` for every ``mu <= 1``.

    ``log rho`` is a random trigonometric sum whose Lipschitz constant is
    ``fill * a``; on leaves of length at most 1 that implies the Hoelder bound.
    """
    if leaf.length > 1.0:
        raise ValueError("leaf longer than 1: Lipschitz no longer implies the Hoelder bound")
    s = leaf.offsets
    L = max(leaf.length, 1e-12)
    h = np.zeros_like(s)
    lip = 0.0
    for k in range(1, modes + 1):
        c = rng.normal() / k
        ph = rng.uniform(0, 2 * np.pi)
        freq = 2 * np.pi * k / (2 * L)
        h += c * np.sin(freq * s + ph)
        lip += abs(c) * freq
    scale = fill * a / lip if lip > 0 else 0.0
    return np.exp(scale * h + rng.normal())


# -- leaf operators and condition B -------------------------------------------

def preimage_leaf(fmap: HyperbolicMap, gamma: StableLeaf) -> StableLeaf:
    """The stable segment ``f^{-1}(gamma)`` (single branch), with matching samples."""
    x, ok = fmap.preimage(gamma.samples)
    if not np.all(ok):
        raise DomainError("leaf is not contained in f(Q)")
    anchor, ok_a = fmap.preimage(gamma.anchor[None, :])
    if not ok_a[0]:
        raise DomainError("leaf anchor is not in f(Q)")
    return StableLeaf(anchor=anchor[0], direction=gamma.direction,
                      half_length=gamma.half_length / fmap.lambda_s,
                      offsets=gamma.offsets / fmap.lambda_s, samples=x, chart=gamma.chart)


def leaf_pushforward(fmap: HyperbolicMap, lik, y, gamma_j: StableLeaf, rho: Callable) -> np.ndarray:
    """``rho_j = |det Df_gamma| / |det Df| * (rho o f) * (g o f)`` on the samples of gamma_j."""
    x = gamma_j.samples
    fx = fmap._forward(x)
    return fmap.stable_jacobian(x) / fmap.jacobian_det(x) * np.asarray(rho(fx), float) * lik.pdf(y, fx)


@dataclass
class ConditionBReport:
    lhs: float
    rhs: float
    theta_a: float
    verdict: Optional[bool]  # None when theta_a is infinite (inconclusive)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def conditionB_check(phi, gamma: StableLeaf, rho1, rho2, a: float, mu: float, tol: float = 1e-12) -> ConditionBReport:
    """``log(int phi rho1 / int phi rho2) <= theta_a(rho1, rho2) + log(int rho1 / int rho2)``."""
    w = trapezoid_weights(gamma.offsets)
    f = np.asarray(phi, dtype=float).ravel()
    r1 = np.asarray(rho1, dtype=float).ravel()
    r2 = np.asarray(rho2, dtype=float).ravel()
    if np.any(~(r1 > 0)) or np.any(~(r2 > 0)):
        raise ConeViolationError("leaf densities must be strictly positive")
    num, den = float(w @ (f * r1)), float(w @ (f * r2))
    if not (num > 0 and den > 0):
        raise ConeViolationError("phi is not in the positive-average cone for these densities")
    lhs = math.log(num / den)
    th = theta_holder(r1, r2, gamma, a, mu).theta
    rhs = th + math.log(float(w @ r1) / float(w @ r2))
    if math.isinf(th):
        return ConditionBReport(lhs, INF, th, None)
    return ConditionBReport(lhs, rhs, th, lhs <= rhs + tol * max(1.0, abs(rhs)))


# -- cone parameters -----------------------------------------------------------

@dataclass
class ConeParams:
    c: float
    a_hat: float
    a: float
    mu: float
    nu: float
    mu_hat: float

    def __post_init__(self):
        vals = (self.c, self.a_hat, self.a, self.mu, self.nu, self.mu_hat)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("cone parameters must be finite")
        if min(self.c, self.a_hat, self.a) <= 0:
            raise ValueError("c, a_hat and a must be positive")
        for name in ("mu", "nu", "mu_hat"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if abs(self.mu - (self.mu_hat + self.nu)) > 1e-12:
            raise ValueError("need mu = mu_hat + nu")
        if self.a_hat < self.a:
            raise ValueError("need a_hat >= a")


class ConeEnvironment:
    """Random constants along an orbit of the base shift, indexed by integer time.

    ``G`` is either a constant or a callable ``k -> G(T^k omega)``; constants
    of the map come from ``fmap`` (or keyword overrides). Series are truncated
    at ``N`` terms and cached per time index.
    """

    def __init__(self, lambda_s: float, lambda_u: float, G, delta: float, mu_hat: float, nu: float,
                 K1: float = 0.0, K2: float = 0.0, K3: float = 1.0, a0: float = 1.0, nu0: float = 1.0,
                 N: int = 400):
        self.lambda_s = float(lambda_s)
        self.lambda_u = float(lambda_u)
        self.K1, self.K2, self.K3, self.a0, self.nu0 = float(K1), float(K2), float(K3), float(a0), float(nu0)
        self.mu_hat = float(mu_hat)
        self.nu = float(nu)
        self.mu = self.mu_hat + self.nu
        self.delta = float(delta)
        self.N = int(N)
        self._G = G if callable(G) else (lambda k, g=float(G): g)
        self.constant = not callable(G)
        if not 0 < self.mu <= min(1.0, self.nu0):
            raise ValueError("need 0 < mu = mu_hat + nu <= min(1, nu0)")
        floor = max(self.lambda_s ** self.mu, self.lambda_s ** self.mu_hat, self.lambda_u ** self.nu)
        if not floor < self.delta < 1:
            raise ValueError(f"delta must lie in ({floor:.6g}, 1)")
        if self.N < 1:
            raise ValueError("truncation N must be at least 1")
        self._cache: Dict[tuple, float] = {}

    @classmethod
    def from_map(cls, fmap: HyperbolicMap, G, delta: float, mu_hat: float, nu: float, N: int = 400):
        return cls(fmap.lambda_s, fmap.lambda_u, G, delta, mu_hat, nu, K1=fmap.K1, K2=fmap.K2,
                   K3=fmap.K3, a0=fmap.a0, nu0=fmap.nu0, N=N)

    # decay rates
    @property
    def lambda_a(self) -> float:
        return self.lambda_s ** self.mu / self.delta

    @property
    def lambda_a_hat(self) -> float:
        return self.lambda_s ** self.mu_hat / self.delta

    @property
    def lambda_c(self) -> float:
        return self.lambda_u ** self.nu / self.delta

    def _memo(self, key, fn):
        v = self._cache.get(key)
        if v is None:
            v = fn()
            self._cache[key] = v
        return v

    def G(self, k: int) -> float:
        return float(self._G(k))

    def G_bar(self, k: int) -> float:
        return self.G(k) + (self.K1 + self.K2) / self.lambda_s ** self.mu

    def _series(self, fn, k, lam, step=1):
        vals = np.array([fn(k + step * j) for j in range(self.N)])
        return float(np.sum(vals * lam ** np.arange(1, self.N + 1)))

    def a(self, k: int) -> float:
        return self._memo(("a", k), lambda: self._series(self.G_bar, k, self.lambda_a))

    def G1(self, k: int) -> float:
        return self.lambda_s ** (-self.mu_hat) * (self.a0 ** self.mu * self.a(k) + self.a0)

    def G2(self, k: int) -> float:
        return (self.a(k + 1) * self.a0 ** self.mu + self.a0 + self.G_bar(k)) * self.lambda_s ** (self.mu - self.mu_hat)

    def G_tilde(self, k: int) -> float:
        return self._memo(("Gt", k), lambda: self.G_bar(k) + self.G1(k) + self.G2(k))

    def a_hat(self, k: int) -> float:
        return self._memo(("ah", k), lambda: self._series(self.G_tilde, k, self.lambda_a_hat))

    def K(self, k: int) -> float:
        """Leaf-to-leaf log-ratio constant, with ``a' = a(T omega)`` and ``mu' = mu``."""
        lu = self.lambda_u
        return (self.a(k + 1) * (1 + self.K3 * lu) ** self.mu + self.a0 * (1 + lu ** self.nu0)
                + self.K1 * lu ** self.nu0 + self.K2 * lu + self.K3 * lu * self.G(k))

    def K5(self, k: int) -> float:
        a_hat = self.a_hat(k)
        a_bar = self.delta * a_hat
        K4 = max(2 * self.K(k), 2 * a_bar)
        return K4 / -math.expm1(a_bar - a_hat)

    def K0(self, k: int) -> float:
        return self._memo(("K0", k), lambda: 3 * self.K(k) + 2 * self.K5(k))

    def c(self, k: int) -> float:
        def series():
            vals = np.array([self.K0(k - j - 1) for j in range(self.N)])
            return float(np.sum(vals * self.lambda_c ** np.arange(self.N)) / self.delta)
        return self._memo(("c", k), series)

    # truncation tails with the sup of the realized constants
    def tails(self, k: int = 0) -> dict:
        N = self.N
        gb = max(self.G_bar(k + j) for j in range(N + 1))
        gt = max(self.G_tilde(k + j) for j in range(N + 1))
        k0 = max(self.K0(k - j - 1) for j in range(N + 1))
        la, lh, lc = self.lambda_a, self.lambda_a_hat, self.lambda_c
        return {"a": gb * la ** (N + 1) / (1 - la),
                "a_hat": gt * lh ** (N + 1) / (1 - lh),
                "c": k0 * lc ** N / (self.delta * (1 - lc))}

    def params(self, k: int = 0) -> ConeParams:
        return ConeParams(c=self.c(k), a_hat=self.a_hat(k), a=self.a(k), mu=self.mu, nu=self.nu,
                          mu_hat=self.mu_hat)

    def describe(self) -> dict:
        return dict(lambda_s=self.lambda_s, lambda_u=self.lambda_u, K1=self.K1, K2=self.K2, K3=self.K3,
                    a0=self.a0, nu0=self.nu0, delta=self.delta, mu=self.mu, nu=self.nu, mu_hat=self.mu_hat,
                    lambda_a=self.lambda_a, lambda_a_hat=self.lambda_a_hat, lambda_c=self.lambda_c,
                    N=self.N, constant_channel=self.constant)


@dataclass
class StationaryParams:
    params: ConeParams
    tails: dict
    constants: dict


def image_cone_ratio(env: "ConeEnvironment", k: int = 0) -> float:
    """``(a(k+1) + G_bar(k)) lambda_s^mu / a(k)``: the leaf operator maps ``D(a(k+1))`` into ``D(ratio * a(k))``.

    Equals ``delta`` for the stationary series.
    """
    return (env.a(k + 1) + env.G_bar(k)) * env.lambda_s ** env.mu / env.a(k)


def stationary_cone_params(env: ConeEnvironment, k: int = 0) -> StationaryParams:
    """Truncated stationary series (a, a_hat, c) at time k with truncation bounds."""
    consts = {"G": env.G(k), "G_bar": env.G_bar(k), "G_tilde": env.G_tilde(k), "K": env.K(k),
              "K5": env.K5(k), "K0": env.K0(k)}
    return StationaryParams(env.params(k), env.tails(k), consts)


def closed_form_params(env: ConeEnvironment) -> dict:
    """Geometric-series values for a constant channel."""
    if not env.constant:
        raise ValueError("closed forms need a constant channel")
    la, lh, lc = env.lambda_a, env.lambda_a_hat, env.lambda_c
    gb = env.G_bar(0)
    a = gb * la / (1 - la)
    G1 = env.lambda_s ** (-env.mu_hat) * (env.a0 ** env.mu * a + env.a0)
    G2 = (a * env.a0 ** env.mu + env.a0 + gb) * env.lambda_s ** (env.mu - env.mu_hat)
    gt = gb + G1 + G2
    a_hat = gt * lh / (1 - lh)
    lu = env.lambda_u
    K = (a * (1 + env.K3 * lu) ** env.mu + env.a0 * (1 + lu ** env.nu0) + env.K1 * lu ** env.nu0
         + env.K2 * lu + env.K3 * lu * env.G(0))
    a_bar = env.delta * a_hat
    K5 = max(2 * K, 2 * a_bar) / -math.expm1(a_bar - a_hat)
    K0 = 3 * K + 2 * K5
    c = K0 / (env.delta * (1 - lc))
    return {"a": a, "a_hat": a_hat, "c": c, "G_tilde": gt, "K": K, "K5": K5, "K0": K0}


def invariance_slack(env: ConeEnvironment, k: int = 0) -> dict:
    """Slack (lhs - rhs) of the parameter inequalities at time k.

    ``delta`` entries use the inequalities as printed, ``plain`` entries drop
    the margin ``delta`` (the bare invariance requirement), and ``c_recursion``
    is the identity ``delta c(T omega) = c lambda_u^nu + K0`` satisfied by the
    stationary series.
    """
    ls, lu, d = env.lambda_s, env.lambda_u, env.delta
    mu, mh, nu, a0 = env.mu, env.mu_hat, env.nu, env.a0
    a, a1, ah, ah1 = env.a(k), env.a(k + 1), env.a_hat(k), env.a_hat(k + 1)
    c, c1 = env.c(k), env.c(k + 1)
    gb, K0 = env.G_bar(k), env.K0(k)
    rhs = {"a_1": (a1 + gb) * ls ** mu,
           "a_2": (a1 + gb) * ls ** mu * a0 ** mu + a0,
           "a_3": (a1 * a0 ** mu + a0 + gb) * ls ** mu,
           "a_4": (ah1 + gb) * ls ** mh}
    delta_form = {key: d * (a if key == "a_1" else ah) - v for key, v in rhs.items()}
    plain = {key: (a if key == "a_1" else ah) - v for key, v in rhs.items()}
    delta_form["c"] = c1 - (d * c * lu ** nu + K0)
    plain["c"] = c1 - (c * lu ** nu + K0)
    return {"delta": delta_form, "plain": plain,
            "c_recursion": d * c1 - (c * lu ** nu + K0),
            "scale": {"a_1": a, "a_2": ah, "a_3": ah, "a_4": ah, "c": c1},
            "tails": env.tails(k)}


def cone_parameter_step(env: ConeEnvironment, k: int, z: float, x_hat: float, x: float) -> tuple:
    """One application of Theta at time k."""
    if min(z, x_hat, x) <= 0:
        raise ValueError("cone parameters must be positive")
    return (z * env.lambda_u ** env.nu + env.K0(k),
            x_hat / env.lambda_s ** env.mu_hat - env.G_tilde(k),
            x / env.lambda_s ** env.mu - env.G_bar(k))


def absorption_bound(z0: float, c: float, delta: float) -> int:
    """Smallest n with ``n > log(z0/c) / log(lambda_c / lambda_u^nu)``; the rate ratio is ``1/delta``.

    Equals ``ceil`` of the ratio unless the ratio is an integer.
    """
    if z0 < c:
        return 0
    return int(math.floor(math.log(z0 / c) / math.log(1.0 / delta))) + 1


def absorption_steps(env: ConeEnvironment, z0: float, k0: int = 0, max_steps: int = 10_000) -> int:
    """Steps n until ``z_n < c(T^n omega)`` under the first component of Theta."""
    z = float(z0)
    for n in range(max_steps + 1):
        if z < env.c(k0 + n):
            return n
        z = z * env.lambda_u ** env.nu + env.K0(k0 + n)
    raise RuntimeError("no absorption within max_steps")


def absorption_table(env: ConeEnvironment, n_starts: int, log_range: float, seed: int, k0: int = 0) -> List[dict]:
    """Observed absorption times against the bound for ``z0 = c * 10**u``, ``u ~ U[0, log_range]``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    c0 = env.c(k0)
    rows = []
    for u in rng.uniform(0.0, log_range, size=n_starts):
        z0 = c0 * 10.0 ** u
        n = absorption_steps(env, z0, k0)
        bound = absorption_bound(z0, c0, env.delta)
        rows.append({"z0": z0, "steps": n, "bound": bound, "within": n <= bound})
    return rows
