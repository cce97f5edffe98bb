"""Densities on chart grids and discretized transfer operators.

A ``ChartGrid`` covers the chart of a map with a regular box lattice. On the
solid torus only cells whose centre lies in the unit disk are *active*; every
grid stores values for active cells only, in C order. Cell volumes are
normalized so that the active cells have total volume ``m(Q) = 1``.

Two transfer backends share the ``apply(values) -> values`` interface:

* ``PointwiseTransfer``: ``P phi(y) = phi(f^{-1} y) / |det Df(f^{-1} y)|`` at
  cell centres, with multilinear interpolation of grid values (or exact
  evaluation when ``phi`` is a callable).
* ``UlamMatrix``: ``P_ij = m(B_i & f^{-1} B_j) / m(B_i)`` from a fixed
  subsample lattice in each cell.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .manifold import HyperbolicMap, StableLeaf, wrap01

MAX_NNZ = 10_000_000


class ConeViolationError(ValueError):
    """A leaf density that must be strictly positive is not."""


class ChartGrid:
    """Regular lattice over a map chart.

    Parameters
    ----------
    chart : {'torus', 'solid_torus', 'discrete'}
    shape : cells per axis. For ``'discrete'`` a 1-tuple with the cell count.
    """

    def __init__(self, chart: str, shape):
        self.chart = chart
        self.shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in self.shape):
            raise ValueError("grid resolution must be positive")
        if chart == "torus":
            if len(self.shape) != 2:
                raise ValueError("torus grids are 2-D")
            self.lows = np.zeros(2)
            self.highs = np.ones(2)
            self.periodic = (True, True)
        elif chart == "solid_torus":
            if len(self.shape) != 3:
                raise ValueError("solid-torus grids are (n_t, n_x, n_y)")
            self.lows = np.array([0.0, -1.0, -1.0])
            self.highs = np.ones(3)
            self.periodic = (True, False, False)
        elif chart == "discrete":
            if len(self.shape) != 1:
                raise ValueError("discrete grids are 1-D")
            self.lows = np.zeros(1)
            self.highs = np.array([float(self.shape[0])])
            self.periodic = (False,)
        else:
            raise ValueError(f"unknown chart {chart!r}")
        self.widths = (self.highs - self.lows) / np.array(self.shape)
        axes = [self.lows[k] + (np.arange(n) + 0.5) * self.widths[k] for k, n in enumerate(self.shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        full = np.stack([m.ravel() for m in mesh], axis=1)
        if chart == "solid_torus":
            active = full[:, 1] ** 2 + full[:, 2] ** 2 < 1.0
        else:
            active = np.ones(len(full), dtype=bool)
        self.active_mask = active
        self.centers = full[active]
        self.lookup = np.full(len(full), -1, dtype=np.int64)
        self.lookup[active] = np.arange(active.sum())
        self.size = int(active.sum())
        self.cell_volume = 1.0 / self.size
        self.axes = axes

    def __eq__(self, other):
        return isinstance(other, ChartGrid) and other.chart == self.chart and other.shape == self.shape

    def __hash__(self):
        return hash((self.chart, self.shape))

    def __repr__(self):
        return f"ChartGrid({self.chart!r}, {self.shape})"

    def cell_index(self, points) -> np.ndarray:
        """Active-cell index for each point, ``-1`` outside the active cells."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((p - self.lows) / self.widths).astype(np.int64)
        bad = np.zeros(len(p), dtype=bool)
        for k, n in enumerate(self.shape):
            if self.periodic[k]:
                idx[:, k] %= n
            else:
                bad |= (idx[:, k] < 0) | (idx[:, k] >= n)
                np.clip(idx[:, k], 0, n - 1, out=idx[:, k])
        flat = np.ravel_multi_index(tuple(idx.T), self.shape)
        out = self.lookup[flat]
        out[bad] = -1
        return out

    def interpolation_matrix(self, points) -> sp.csr_matrix:
        """Sparse multilinear interpolation of cell-centre values at ``points``.

        Neighbours that are inactive contribute zero (densities vanish outside Q).
        """
        p = np.atleast_2d(np.asarray(points, dtype=float))
        u = (p - self.lows) / self.widths - 0.5
        base = np.floor(u).astype(np.int64)
        frac = u - base
        rows, cols, vals = [], [], []
        npts = len(p)
        for corner in itertools.product((0, 1), repeat=len(self.shape)):
            w = np.ones(npts)
            idx = np.empty_like(base)
            ok = np.ones(npts, dtype=bool)
            for k, c in enumerate(corner):
                w *= frac[:, k] if c else 1.0 - frac[:, k]
                i = base[:, k] + c
                if self.periodic[k]:
                    i = i % self.shape[k]
                else:
                    ok &= (i >= 0) & (i < self.shape[k])
                    i = np.clip(i, 0, self.shape[k] - 1)
                idx[:, k] = i
            flat = np.ravel_multi_index(tuple(idx.T), self.shape)
            col = self.lookup[flat]
            ok &= (col >= 0) & (w > 0)
            rows.append(np.nonzero(ok)[0])
            cols.append(col[ok])
            vals.append(w[ok])
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(npts, self.size))

    def describe(self) -> dict:
        return {"chart": self.chart, "shape": list(self.shape), "active_cells": self.size}


@dataclass
class DensityGrid:
    """Nonnegative density (w.r.t. the normalized volume) on active cells."""

    grid: ChartGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got {self.values.shape}")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite and nonnegative")

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_volume)

    def normalize(self) -> "DensityGrid":
        m = self.mass
        if not m > 0:
            raise ValueError("cannot normalize a density with zero mass")
        return DensityGrid(self.grid, self.values / m)

    @classmethod
    def uniform(cls, grid: ChartGrid) -> "DensityGrid":
        return cls(grid, np.ones(grid.size))

    @classmethod
    def from_function(cls, grid: ChartGrid, fn: Callable) -> "DensityGrid":
        return cls(grid, np.asarray(fn(grid.centers), dtype=float))

    def evaluate(self, points) -> np.ndarray:
        return self.grid.interpolation_matrix(points) @ self.values


@dataclass
class TestFunction:
    """Observable psi with an optional Hoelder certificate ``(k, nu)``."""

    __test__ = False  # not a pytest class

    fn: Callable[[np.ndarray], np.ndarray]
    name: str = "psi"
    hoelder: Optional[tuple] = None

    def __call__(self, points) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(points)), dtype=float)

    def check_certificate(self, x, y, distance) -> float:
        """Largest ``|psi(x)-psi(y)| - k d^nu`` over the sample pairs (<= 0 when valid)."""
        if self.hoelder is None:
            raise ValueError(f"{self.name} carries no certificate")
        k, nu = self.hoelder
        d = np.asarray(distance(x, y))
        return float(np.max(np.abs(self(x) - self(y)) - k * d ** nu))


class TransferOperator:
    grid: ChartGrid
    name: str

    def apply(self, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, p: DensityGrid) -> DensityGrid:
        return DensityGrid(p.grid, self.apply(p.values))


class PointwiseTransfer(TransferOperator):
    """Exact pullback formula evaluated at cell centres."""

    name = "pointwise"

    def __init__(self, fmap: HyperbolicMap, grid: ChartGrid):
        self.map = fmap
        self.grid = grid
        x, ok = fmap.preimage(grid.centers)
        self.in_image = ok
        self.preimages = x
        jac = np.ones(grid.size)
        jac[ok] = fmap.jacobian_det(x[ok])
        W = grid.interpolation_matrix(np.where(ok[:, None], x, grid.centers))
        scale = np.where(ok, 1.0 / jac, 0.0)
        self.matrix = sp.diags(scale) @ W
        self.matrix = self.matrix.tocsr()

    def apply(self, values):
        return self.matrix @ values

    def apply_function(self, phi: Callable) -> np.ndarray:
        out = np.zeros(self.grid.size)
        ok = self.in_image
        out[ok] = phi(self.preimages[ok]) / self.map.jacobian_det(self.preimages[ok])
        return out


def transfer_pointwise(fmap: HyperbolicMap, phi, grid: Optional[ChartGrid] = None) -> DensityGrid:
    """Apply the transfer operator pointwise.

    ``phi`` is either a ``DensityGrid`` (interpolated) or a callable on chart
    points (exact); ``grid`` is required for callables.
    """
    if isinstance(phi, DensityGrid):
        return DensityGrid(phi.grid, PointwiseTransfer(fmap, phi.grid).apply(phi.values))
    if grid is None:
        raise ValueError("a grid is needed to tabulate a callable density")
    return DensityGrid(grid, PointwiseTransfer(fmap, grid).apply_function(phi))


class UlamMatrix(TransferOperator):
    """Row-stochastic Ulam discretization; rows are source cells."""

    name = "ulam"

    def __init__(self, matrix: sp.csr_matrix, grid: ChartGrid, subsamples=None):
        self.matrix = matrix.tocsr()
        self.grid = grid
        self.subsamples = subsamples
        self._T = self.matrix.T.tocsr()
        self.row_sums = np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def apply(self, values):
        # equal cell volumes: densities move like masses
        return self._T @ values


def _subsample_offsets(grid: ChartGrid, subsamples, shift: float) -> np.ndarray:
    if np.ndim(subsamples) == 0:
        per_axis = [int(subsamples)] * len(grid.shape)
    else:
        per_axis = [int(s) for s in subsamples]
    if len(per_axis) != len(grid.shape):
        raise ValueError("subsamples must be an int or one int per axis")
    axes = [(np.arange(s) + shift) / s * grid.widths[k] for k, s in enumerate(per_axis)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def ulam_build(fmap: HyperbolicMap, grid: ChartGrid, subsamples=32, shift: float = 0.2,
               chunk_points: int = 2_000_000) -> UlamMatrix:
    """Ulam matrix from a fixed subsample lattice (no randomness).

    ``shift`` places subsample ``k`` at ``(k + shift)/s`` of the cell width.
    The default 0.2 keeps cat-map images of the lattice off cell boundaries,
    which makes the cat-map matrix exactly doubly stochastic.
    """
    if any(n < 2 for n in grid.shape):
        raise ValueError("Ulam resolution must be at least 2 per axis")
    offs = _subsample_offsets(grid, subsamples, shift)
    ns = len(offs)
    # lower corners of active cells
    corners = grid.centers - 0.5 * grid.widths
    per_chunk = max(1, chunk_points // ns)
    blocks = []
    total_nnz = 0
    for start in range(0, grid.size, per_chunk):
        stop = min(grid.size, start + per_chunk)
        pts = (corners[start:stop, None, :] + offs[None, :, :]).reshape(-1, len(grid.shape))
        src = np.repeat(np.arange(start, stop), ns)
        inside = fmap.in_domain(pts)
        pts, src = pts[inside], src[inside]
        img = fmap._forward(pts)
        dst = grid.cell_index(img)
        keep = dst >= 0
        block = sp.coo_matrix((np.ones(keep.sum()), (src[keep], dst[keep])),
                              shape=(grid.size, grid.size)).tocsr()
        block.sum_duplicates()
        total_nnz += block.nnz
        if total_nnz > MAX_NNZ:
            raise MemoryError(f"Ulam matrix would exceed {MAX_NNZ} nonzeros")
        blocks.append(block)
    M = blocks[0]
    for b in blocks[1:]:
        M = M + b
    M = M.tocsr()
    rs = np.asarray(M.sum(axis=1)).ravel()
    # renormalize partially lost rows, zero rows of cells outside Q stay zero
    scale = np.where(rs > 0, 1.0 / np.where(rs > 0, rs, 1.0), 0.0)
    M = sp.diags(scale) @ M
    return UlamMatrix(M, grid, subsamples=subsamples)


class MatrixTransfer(TransferOperator):
    """Generic Markov kernel on a discrete grid (rows = from, columns = to)."""

    name = "matrix"

    def __init__(self, kernel, grid: ChartGrid):
        K = np.asarray(kernel, dtype=float)
        if K.shape != (grid.size, grid.size) or np.any(K < 0):
            raise ValueError("kernel must be a nonnegative square matrix over the grid")
        self.kernel = K
        self.grid = grid

    def apply(self, values):
        return self.kernel.T @ values


def make_transfer(fmap: HyperbolicMap, grid: ChartGrid, backend: str = "ulam", subsamples=32,
                  shift: float = 0.2) -> TransferOperator:
    if backend == "ulam":
        return ulam_build(fmap, grid, subsamples=subsamples, shift=shift)
    if backend == "pointwise":
        return PointwiseTransfer(fmap, grid)
    raise ValueError(f"unknown transfer backend {backend!r}")


def integrate(psi, p: DensityGrid) -> float:
    """Midpoint rule: sum psi(centre) * value * cell volume."""
    if callable(psi):
        vals = np.asarray(psi(p.grid.centers), dtype=float)
    else:
        vals = np.asarray(psi, dtype=float)
    if vals.ndim == 0:
        vals = np.full(p.grid.size, float(vals))
    return float(np.dot(vals, p.values) * p.grid.cell_volume)


def leaf_integrate(phi, gamma: StableLeaf, rho) -> float:
    """Trapezoid integral of phi * rho along the sampled leaf."""
    if isinstance(phi, DensityGrid):
        fv = phi.evaluate(gamma.samples)
    elif callable(phi):
        fv = np.asarray(phi(gamma.samples), dtype=float)
    else:
        fv = np.asarray(phi, dtype=float)
    rv = np.asarray(rho(gamma.samples) if callable(rho) else rho, dtype=float)
    if rv.ndim == 0:
        rv = np.full(gamma.n, float(rv))
    if np.any(~(rv > 0)):
        raise ConeViolationError("leaf density must be strictly positive on all samples")
    return float(np.trapezoid(fv * rv, gamma.offsets))


def trapezoid_weights(offsets) -> np.ndarray:
    s = np.asarray(offsets, dtype=float)
    w = np.zeros_like(s)
    h = np.diff(s)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w
