"""Control pairs on the space-time slab layout.

A control holds one spatial slice per time cell ``(t_{n-1}, t_n]``, n = 1..Nt,
co-located with the nodes of the implicit step it drives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridSpec


@dataclass(eq=False)
class Control:
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        self.u1 = np.asarray(self.u1, dtype=float)
        self.u2 = np.asarray(self.u2, dtype=float)
        if self.u1.shape != self.u2.shape or self.u1.ndim != 2:
            raise ValueError(f"control components must share a 2D shape, got {self.u1.shape}, {self.u2.shape}")
        if not (np.all(np.isfinite(self.u1)) and np.all(np.isfinite(self.u2))):
            raise ValueError("control entries must be finite")

    @classmethod
    def zeros(cls, steps: int, n_nodes: int) -> "Control":
        return cls(np.zeros((steps, n_nodes)), np.zeros((steps, n_nodes)))

    @property
    def shape(self):
        return self.u1.shape

    def copy(self) -> "Control":
        return Control(self.u1.copy(), self.u2.copy())

    def __add__(self, other: "Control") -> "Control":
        return Control(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "Control") -> "Control":
        return Control(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c: float) -> "Control":
        return Control(c * self.u1, c * self.u2)

    __rmul__ = __mul__

    def __neg__(self) -> "Control":
        return Control(-self.u1, -self.u2)

    def is_zero(self) -> bool:
        return not (np.any(self.u1) or np.any(self.u2))

    def is_feasible(self, bounds) -> bool:
        lo1, hi1, lo2, hi2 = bounds
        return bool(np.all((self.u1 >= lo1) & (self.u1 <= hi1)) and np.all((self.u2 >= lo2) & (self.u2 <= hi2)))

    def project(self, bounds) -> "Control":
        lo1, hi1, lo2, hi2 = bounds
        return Control(np.clip(self.u1, lo1, hi1), np.clip(self.u2, lo2, hi2))


def control_inner(a: Control, b: Control, grid: GridSpec, dt: float) -> float:
    """L2(Q)^2 pairing of piecewise-constant-in-time controls."""
    w = grid.weights
    return float(dt * (np.sum((a.u1 * b.u1) @ w) + np.sum((a.u2 * b.u2) @ w)))


def control_norm(a: Control, grid: GridSpec, dt: float) -> float:
    return float(np.sqrt(control_inner(a, a, grid, dt)))


def component_norm(v: np.ndarray, grid: GridSpec, dt: float) -> float:
    return float(np.sqrt(dt * np.sum((v * v) @ grid.weights)))
