"""Signal maps in chart coordinates.

Two concrete uniformly hyperbolic maps are provided:

* ``CatMap``: the linear automorphism ``[[2, 1], [1, 1]]`` of the torus
  ``T^2 = [0, 1)^2``. Anosov, volume preserving, SRB measure = Lebesgue.
* ``Solenoid``: ``f(t, x, y) = (2t mod 1, x/10 + cos(2 pi t)/2,
  y/10 + sin(2 pi t)/2)`` on the solid torus ``Q = S^1 x D`` with ``D`` the
  closed unit disk. A genuine attractor.

All maps act on arrays of shape ``(d,)`` or ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * np.pi
GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


class DomainError(ValueError):
    """A point lies outside the trapping region, or leaves are too far apart."""


class _NotInImage:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NOT_IN_IMAGE"

    def __bool__(self):
        return False


NOT_IN_IMAGE = _NotInImage()


def wrap01(v):
    """Reduce to [0, 1). Guards the ``-tiny % 1 == 1.0`` corner case."""
    r = np.mod(v, 1.0)
    return np.where(r >= 1.0, 0.0, r)


def circ_diff(a, b):
    """Signed shortest difference a - b on the unit circle, in [-1/2, 1/2)."""
    return np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5


@dataclass(frozen=True)
class ManifoldPoint:
    """A single point in chart coordinates with validated invariants."""

    coords: tuple
    chart: str = "torus"

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if self.chart == "torus":
            if c.shape != (2,) or np.any(c < 0) or np.any(c >= 1):
                raise DomainError(f"torus coords must lie in [0,1)^2, got {self.coords}")
        elif self.chart == "solid_torus":
            if c.shape != (3,) or not (0 <= c[0] < 1) or c[1] ** 2 + c[2] ** 2 > 1 + 1e-12:
                raise DomainError(f"solid-torus coords invalid: {self.coords}")
        else:
            raise ValueError(f"unknown chart {self.chart!r}")

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


@dataclass(frozen=True)
class StableLeaf:
    """Sampled local stable segment through ``anchor``.

    ``offsets`` are signed arclength positions of the samples along
    ``direction``; ``samples`` are the reduced chart points.
    """

    anchor: np.ndarray
    direction: np.ndarray
    half_length: float
    offsets: np.ndarray
    samples: np.ndarray
    chart: str

    @property
    def n(self) -> int:
        return len(self.offsets)

    @property
    def length(self) -> float:
        return float(self.offsets[-1] - self.offsets[0])

    def pair_distances(self) -> np.ndarray:
        """Leaf-intrinsic distance matrix |s_i - s_j| (leaves are straight)."""
        return np.abs(self.offsets[:, None] - self.offsets[None, :])


@dataclass
class Holonomy:
    """Projection pi: source -> target along the unstable (or horizontal) direction."""

    source: StableLeaf
    target: StableLeaf
    shift: np.ndarray
    jacobian: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    project: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    distance: float = 0.0

    def apply(self, points):
        return self.project(np.asarray(points, dtype=float))


class HyperbolicMap:
    """Common interface. Subclasses fill in the map-specific pieces."""

    kind: str
    chart: str
    dim: int
    lambda_s: float  # stable contraction bound
    lambda_u: float  # contraction of leaf distances under f^{-1} (leaf-space expansion bound)
    K1: float  # Lipschitz constant of log|det Df|
    K2: float  # Lipschitz constant of log|det Df restricted to stable leaves|
    K3: float  # Lipschitz constant of f
    a0: float  # holonomy regularity constant
    nu0: float

    # -- geometry -----------------------------------------------------------
    def reduce(self, x):
        raise NotImplementedError

    def in_domain(self, x) -> np.ndarray:
        raise NotImplementedError

    def displacement(self, x, y) -> np.ndarray:
        """Shortest chart displacement y - x."""
        raise NotImplementedError

    def distance(self, x, y) -> np.ndarray:
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    # -- dynamics -----------------------------------------------------------
    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.in_domain(x)):
            raise DomainError("point outside Q")
        return self._forward(x)

    def preimage(self, y):
        """Vectorized inverse: returns ``(x, ok)``; rows with ``ok == False`` are NaN."""
        raise NotImplementedError

    def inverse(self, y):
        """Inverse of a single point, or ``NOT_IN_IMAGE``."""
        y = np.asarray(y, dtype=float)
        x, ok = self.preimage(y[None, :])
        return x[0] if ok[0] else NOT_IN_IMAGE

    def jacobian_det(self, x) -> np.ndarray:
        raise NotImplementedError

    def stable_jacobian(self, x) -> np.ndarray:
        """|det Df| restricted to the stable leaf (1-D segment)."""
        raise NotImplementedError

    def stable_direction(self, x) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x) -> np.ndarray:
        raise NotImplementedError

    def orbit(self, x0, n: int) -> np.ndarray:
        out = np.empty((n,) + np.shape(x0))
        x = np.asarray(x0, dtype=float)
        for k in range(n):
            out[k] = x
            x = self._forward(x)
        return out

    # -- leaves -------------------------------------------------------------
    def stable_leaf_through(self, x, half_length: float, n_samples: int = 65, direction=None) -> StableLeaf:
        if half_length <= 0:
            raise ValueError("half_length must be positive")
        if n_samples < 2:
            raise ValueError("need at least two leaf samples")
        x = self.reduce(np.asarray(x, dtype=float))
        v = self.stable_direction(x) if direction is None else self._leaf_direction(direction)
        s = np.linspace(-half_length, half_length, n_samples)
        pts = self._leaf_points(x, v, s)
        return StableLeaf(anchor=x, direction=v, half_length=float(half_length),
                          offsets=s, samples=pts, chart=self.chart)

    def leaf_image(self, leaf: StableLeaf) -> StableLeaf:
        """f(leaf): again a straight stable segment, scaled by lambda_s."""
        anchor = self._forward(leaf.anchor)
        v = self._image_direction(leaf)
        s = leaf.offsets * self.lambda_s
        return StableLeaf(anchor=anchor, direction=v, half_length=leaf.half_length * self.lambda_s,
                          offsets=s, samples=self._forward(leaf.samples), chart=self.chart)

    def leaf_coordinate(self, leaf: StableLeaf, points) -> np.ndarray:
        """Arclength coordinate of points lying on ``leaf``."""
        return self.displacement(leaf.anchor, points) @ leaf.direction

    def holonomy_between(self, delta: StableLeaf, gamma: StableLeaf) -> Holonomy:
        raise NotImplementedError

    def _leaf_points(self, x, v, s):
        raise NotImplementedError

    def _leaf_direction(self, direction):
        v = np.asarray(direction, dtype=float)
        return v / np.linalg.norm(v)

    def _image_direction(self, leaf):
        return leaf.direction

    def _forward(self, x):
        raise NotImplementedError

    def describe(self) -> dict:
        return dict(kind=self.kind, lambda_s=self.lambda_s, lambda_u=self.lambda_u, K1=self.K1,
                    K2=self.K2, K3=self.K3, a0=self.a0, nu0=self.nu0)


class CatMap(HyperbolicMap):
    kind = "cat"
    chart = "torus"
    dim = 2
    A = np.array([[2.0, 1.0], [1.0, 1.0]])
    A_inv = np.array([[1.0, -1.0], [-1.0, 2.0]])

    def __init__(self):
        self.lambda_s = (3.0 - np.sqrt(5.0)) / 2.0
        self.lambda_unstable = (3.0 + np.sqrt(5.0)) / 2.0
        # preimages of parallel stable leaves are closer by 1/lambda_unstable
        self.lambda_u = 1.0 / self.lambda_unstable
        self.K1 = 0.0
        self.K2 = 0.0
        self.K3 = float(np.linalg.norm(self.A, 2))
        self.a0 = 1.0
        self.nu0 = 1.0
        vs = np.array([1.0, -GOLDEN])
        vu = np.array([GOLDEN, 1.0])
        self.v_s = vs / np.linalg.norm(vs)
        self.v_u = vu / np.linalg.norm(vu)

    def reduce(self, x):
        return wrap01(np.asarray(x, dtype=float))

    def in_domain(self, x):
        x = np.asarray(x)
        return np.ones(x.shape[:-1], dtype=bool)

    def displacement(self, x, y):
        return circ_diff(y, x)

    def _forward(self, x):
        return wrap01(np.asarray(x, dtype=float) @ self.A.T)

    def preimage(self, y):
        y = np.asarray(y, dtype=float)
        x = wrap01(y @ self.A_inv.T)
        return x, np.ones(y.shape[:-1], dtype=bool)

    def jacobian_det(self, x):
        return np.ones(np.shape(x)[:-1])

    def stable_jacobian(self, x):
        return np.full(np.shape(x)[:-1], self.lambda_s)

    def jacobian(self, x):
        return np.broadcast_to(self.A, np.shape(x)[:-1] + (2, 2))

    def stable_direction(self, x):
        return self.v_s.copy()

    def _leaf_direction(self, direction):
        v = super()._leaf_direction(direction)
        if abs(abs(v @ self.v_s) - 1.0) > 1e-12:
            raise ValueError("cat-map leaves must follow the stable eigendirection")
        return self.v_s.copy()

    def _leaf_points(self, x, v, s):
        return wrap01(x[None, :] + s[:, None] * v[None, :])

    def _image_direction(self, leaf):
        # A v_s = lambda_s v_s, sign preserved
        return leaf.direction

    def holonomy_between(self, delta: StableLeaf, gamma: StableLeaf) -> Holonomy:
        """Translation along the unstable direction taking ``delta`` onto the line of ``gamma``."""
        w = circ_diff(gamma.anchor, delta.anchor)
        c = float(w @ self.v_u)
        if abs(c) > 0.25:
            raise DomainError("leaves too far apart for a local holonomy")
        shift = c * self.v_u
        return Holonomy(source=delta, target=gamma, shift=shift,
                        jacobian=lambda p: np.ones(np.shape(p)[:-1]),
                        project=lambda p: wrap01(p + shift), distance=abs(c))


class Solenoid(HyperbolicMap):
    """Smale-Williams solenoid on the solid torus, coords (t, x, y)."""

    kind = "solenoid"
    chart = "solid_torus"
    dim = 3

    def __init__(self, contraction: float = 0.1, radius: float = 0.5):
        if not (0 < contraction and radius + contraction < 1):
            raise ValueError("solenoid parameters must keep f(Q) inside Q")
        self.c = float(contraction)
        self.r = float(radius)
        self.lambda_s = self.c
        self.lambda_u = 0.5  # angle doubling halves the distance between vertical leaves under f^{-1}
        self.K1 = 0.0
        self.K2 = 0.0
        self.K3 = float(np.linalg.norm(self.jacobian(np.array([0.0, 0.0, 0.0])), 2))
        self.a0 = 1.0
        self.nu0 = 1.0

    def reduce(self, x):
        x = np.array(x, dtype=float, copy=True)
        x[..., 0] = wrap01(x[..., 0])
        return x

    def in_domain(self, x, tol: float = 1e-12):
        x = np.asarray(x)
        return x[..., 1] ** 2 + x[..., 2] ** 2 <= 1.0 + tol

    def displacement(self, x, y):
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        d = np.array(d, copy=True)
        d[..., 0] = circ_diff(np.asarray(y)[..., 0], np.asarray(x)[..., 0])
        return d

    def _forward(self, p):
        p = np.asarray(p, dtype=float)
        t = p[..., 0]
        out = np.empty_like(p)
        out[..., 0] = wrap01(2.0 * t)
        out[..., 1] = self.c * p[..., 1] + self.r * np.cos(TWO_PI * t)
        out[..., 2] = self.c * p[..., 2] + self.r * np.sin(TWO_PI * t)
        return out

    def preimage(self, q):
        q = np.asarray(q, dtype=float)
        flat = q.reshape(-1, 3)
        x = np.full_like(flat, np.nan)
        ok = np.zeros(len(flat), dtype=bool)
        for branch in (0.0, 0.5):
            t = wrap01(flat[:, 0] / 2.0 + branch)
            u = (flat[:, 1] - self.r * np.cos(TWO_PI * t)) / self.c
            v = (flat[:, 2] - self.r * np.sin(TWO_PI * t)) / self.c
            hit = (u * u + v * v <= 1.0) & ~ok
            x[hit, 0] = t[hit]
            x[hit, 1] = u[hit]
            x[hit, 2] = v[hit]
            ok |= hit
        return x.reshape(q.shape), ok.reshape(q.shape[:-1])

    def jacobian_det(self, x):
        return np.full(np.shape(x)[:-1], 2.0 * self.c * self.c)

    def stable_jacobian(self, x):
        return np.full(np.shape(x)[:-1], self.c)

    def jacobian(self, p):
        p = np.asarray(p, dtype=float)
        t = p[..., 0]
        J = np.zeros(p.shape[:-1] + (3, 3))
        J[..., 0, 0] = 2.0
        J[..., 1, 0] = -TWO_PI * self.r * np.sin(TWO_PI * t)
        J[..., 2, 0] = TWO_PI * self.r * np.cos(TWO_PI * t)
        J[..., 1, 1] = self.c
        J[..., 2, 2] = self.c
        return J

    def stable_direction(self, x):
        return np.array([0.0, 1.0, 0.0])

    def _leaf_direction(self, direction):
        v = np.asarray(direction, dtype=float)
        if v.shape == (2,):
            v = np.array([0.0, v[0], v[1]])
        if abs(v[0]) > 1e-12:
            raise ValueError("solenoid leaves are vertical (constant angle)")
        return v / np.linalg.norm(v)

    def _leaf_points(self, x, v, s):
        pts = x[None, :] + s[:, None] * v[None, :]
        if not np.all(self.in_domain(pts)):
            raise DomainError("leaf leaves the solid torus; reduce half_length")
        return pts

    def boundary_samples(self, n: int, rng) -> np.ndarray:
        t = rng.random(n)
        phi = rng.random(n) * TWO_PI
        return np.stack([t, np.cos(phi), np.sin(phi)], axis=1)

    def holonomy_between(self, delta: StableLeaf, gamma: StableLeaf) -> Holonomy:
        """Horizontal projection between vertical leaves at nearby angles."""
        dt = float(circ_diff(gamma.anchor[0], delta.anchor[0]))
        if abs(dt) > 0.25:
            raise DomainError("leaves too far apart for a local holonomy")
        shift = np.array([dt, 0.0, 0.0])
        return Holonomy(source=delta, target=gamma, shift=shift,
                        jacobian=lambda p: np.ones(np.shape(p)[:-1]),
                        project=lambda p: self.reduce(p + shift), distance=abs(dt))


def make_map(kind: str, **params) -> HyperbolicMap:
    if kind == "cat":
        return CatMap()
    if kind == "solenoid":
        return Solenoid(**params)
    raise ValueError(f"unknown map kind {kind!r}")
