"""Uniform node-centred grids on an interval or rectangle with Neumann closure."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product grid; nodal arrays are flattened row-major over ``counts``."""

    dim: int
    extents: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.extents) != self.dim or len(self.counts) != self.dim:
            raise ValueError("extents and counts must have one entry per axis")
        if any(c < 3 for c in self.counts):
            raise ValueError(f"need at least 3 nodes per axis, got {self.counts}")
        if any(not e > 0 for e in self.extents):
            raise ValueError(f"extents must be positive, got {self.extents}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / (c - 1) for e, c in zip(self.extents, self.counts))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.counts)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.counts))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(0.0, e, c) for e, c in zip(self.extents, self.counts)]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Flattened coordinate arrays, one per axis."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return tuple(m.reshape(-1) for m in mesh)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights per node."""
        w = np.ones(1)
        for h, c in zip(self.spacing, self.counts):
            wa = np.full(c, h)
            wa[[0, -1]] = 0.5 * h
            w = np.kron(w, wa)
        return w

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """Second-order Neumann Laplacian with mirrored ghost nodes."""
        mats = [_laplacian_1d(c, h) for c, h in zip(self.counts, self.spacing)]
        if self.dim == 1:
            return mats[0].tocsr()
        ix = sp.identity(self.counts[0], format="csr")
        iy = sp.identity(self.counts[1], format="csr")
        return (sp.kron(mats[0], iy) + sp.kron(ix, mats[1])).tocsr()

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        """Integrate nodal values over the domain (last axis is the node axis)."""
        return np.asarray(values) @ self.weights

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return self.laplacian @ values
        return (self.laplacian @ values.T).T


def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    off = np.ones(n - 1)
    lo = off.copy()
    up = off.copy()
    # ghost node f[-1] = f[1] doubles the inward neighbour on each end
    up[0] = 2.0
    lo[-1] = 2.0
    return sp.diags([lo, main, up], [-1, 0, 1], format="csr") / h**2


def build_grid(dim: int, extents, counts) -> GridSpec:
    return GridSpec(int(dim), tuple(float(e) for e in extents), tuple(int(c) for c in counts))


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.size != self.grid.n_nodes:
            raise ValueError(f"field has {vals.size} values, grid has {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", vals)


def laplacian_neumann(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.apply_laplacian(f.values))


def integrate_omega(f: ScalarField) -> float:
    return float(f.grid.integrate(f.values))


def time_weights(n_slices: int, dt: float) -> np.ndarray:
    """Trapezoidal weights for ``n_slices`` equispaced time levels."""
    w = np.full(n_slices, dt)
    w[[0, -1]] = 0.5 * dt
    return w


def inner_l2_q(a, b, dt: float, grid: GridSpec, *, layout: str = "nodes") -> float:
    """Space-time L2 pairing.

    ``layout="nodes"`` treats the leading axis as time levels (trapezoid);
    ``layout="slabs"`` treats it as piecewise-constant time cells of width ``dt``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    spatial = grid.integrate(a * b)
    if layout == "nodes":
        return float(spatial @ time_weights(a.shape[0], dt))
    if layout == "slabs":
        return float(dt * spatial.sum())
    raise ValueError(f"unknown layout {layout!r}")
