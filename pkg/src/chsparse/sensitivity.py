"""Linear solves about a frozen state: linearised, bilinearised and adjoint.

All three reuse one family of implicit-Euler step operators ``A_n = M + dt K_n``
with coefficients frozen at the state's time level ``n``. The adjoint is the
exact weighted transpose of the forward recursion, so the discrete pairing
identities between them hold to linear-solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import Control
from .model import CostParams, ModelParams
from .state import InitialData, StateTrajectory, TimeGrid, mass_matrix


@dataclass(frozen=True)
class FlagSet:
    lambda1: int = 1
    lambda2: int = 1
    lambda3: int = 0
    lambda4: int = 0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "lambda3", "lambda4"):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")


LINEARIZED = FlagSet(1, 1, 0, 0)
BILINEARIZED = FlagSet(1, 0, 1, 0)


@dataclass(eq=False)
class LinTrajectory:
    """Three linear fields on the time levels, shape (Nt+1, n) each."""

    eta: np.ndarray
    xi: np.ndarray
    theta: np.ndarray
    role: str = "linearized"

    def __add__(self, other):
        return LinTrajectory(self.eta + other.eta, self.xi + other.xi, self.theta + other.theta, self.role)

    def __sub__(self, other):
        return LinTrajectory(self.eta - other.eta, self.xi - other.xi, self.theta - other.theta, self.role)

    def scaled(self, c: float) -> "LinTrajectory":
        return LinTrajectory(c * self.eta, c * self.xi, c * self.theta, self.role)

    def max_abs(self) -> float:
        return float(max(np.abs(self.eta).max(), np.abs(self.xi).max(), np.abs(self.theta).max()))


@dataclass(eq=False)
class AdjointTrajectory:
    """Adjoint fields (p, q, r), stored forward-indexed with shape (Nt+1, n).

    Slice ``j < Nt`` is the multiplier of implicit step ``j + 1`` and therefore
    pairs with control slab ``j``; slice ``Nt`` holds the terminal data.
    """

    p: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @property
    def p_cells(self) -> np.ndarray:
        return self.p[:-1]

    @property
    def q_cells(self) -> np.ndarray:
        return self.q[:-1]

    @property
    def r_cells(self) -> np.ndarray:
        return self.r[:-1]

    def terminal(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.p[-1], self.q[-1], self.r[-1]


def _space_time(arr, steps: int, n_nodes: int, levels: bool = True) -> np.ndarray:
    rows = steps + 1 if levels else steps
    return np.broadcast_to(np.asarray(arr, dtype=float), (rows, n_nodes))


def solve_generalized(flags: FlagSet, frozen: StateTrajectory, h: Control | None = None, f=None,
                      init: InitialData | None = None, params: ModelParams | None = None,
                      cost: CostParams | None = None, tg: TimeGrid | None = None) -> LinTrajectory:
    """Implicit-Euler solve of the linear system with gated coupling, sources and data.

    ``lambda1`` switches the frozen nonlinear couplings, ``lambda2`` the control
    sources ``(-h_field h1, 0, h2)``, ``lambda3`` the volume sources ``f`` (a
    triple of (Nt+1, n) arrays used at the implicit level) and ``lambda4`` the
    initial data.
    """
    params = params or frozen.params
    tg = tg or frozen.time_grid
    grid = frozen.grid
    steps, n_nodes, dt = tg.steps, grid.n_nodes, tg.dt
    fz = frozen.frozen
    M = mass_matrix(params)

    src = np.zeros((steps + 1, n_nodes, 3))
    if flags.lambda2 and h is not None:
        if h.shape != (steps, n_nodes):
            raise ValueError(f"direction shape {h.shape} does not match ({steps}, {n_nodes})")
        hf = cost.h_field if cost is not None else 1.0
        src[1:, :, 0] -= _space_time(hf, steps, n_nodes, levels=False) * h.u1
        src[1:, :, 2] += h.u2
    if flags.lambda3 and f is not None:
        for c in range(3):
            src[:, :, c] += _space_time(f[c], steps, n_nodes)

    Y = np.zeros((steps + 1, n_nodes, 3))
    if flags.lambda4 and init is not None:
        Y[0] = init.stacked()
    lam1 = float(flags.lambda1)
    for n in range(1, steps + 1):
        rhs = Y[n - 1] @ M.T + dt * src[n]
        if not np.any(rhs):
            continue
        Y[n] = fz.factor(n, lam1).solve(rhs)
    role = "bilinearized" if flags == BILINEARIZED else "linearized"
    return LinTrajectory(Y[:, :, 0].copy(), Y[:, :, 1].copy(), Y[:, :, 2].copy(), role)


def solve_linearized(frozen: StateTrajectory, h: Control, cost: CostParams | None = None) -> LinTrajectory:
    return solve_generalized(LINEARIZED, frozen, h=h, cost=cost)


def bilinear_sources(frozen: StateTrajectory, lh: LinTrajectory, lk: LinTrajectory):
    """Pointwise sources ``(f1, f2, -f1)`` of the second-order sensitivity system."""
    fz = frozen.frozen
    chi = frozen.params.chi
    wh = lh.theta - chi * lh.xi - lh.eta
    wk = lk.theta - chi * lk.xi - lk.eta
    f1 = fz.dP * (lk.xi * wh + lh.xi * wk) + fz.d2P * lk.xi * lh.xi * fz.s
    f2 = -fz.d3F * lh.xi * lk.xi
    return f1, f2, -f1


def solve_bilinearized(frozen: StateTrajectory, h: Control, k: Control,
                       cost: CostParams | None = None, lin_h: LinTrajectory | None = None,
                       lin_k: LinTrajectory | None = None) -> LinTrajectory:
    lh = lin_h if lin_h is not None else solve_linearized(frozen, h, cost)
    lk = lin_k if lin_k is not None else solve_linearized(frozen, k, cost)
    return solve_generalized(BILINEARIZED, frozen, f=bilinear_sources(frozen, lh, lk), cost=cost)


def tracking_residuals(frozen: StateTrajectory, cost: CostParams):
    """``phi - target_q`` on all levels and ``phi(T) - target_omega``."""
    steps, n_nodes = frozen.time_grid.steps, frozen.grid.n_nodes
    dq = frozen.phi - _space_time(cost.target_q, steps, n_nodes)
    domega = frozen.phi[-1] - np.broadcast_to(np.asarray(cost.target_omega, dtype=float), (n_nodes,))
    return dq, domega


def solve_adjoint(frozen: StateTrajectory, cost: CostParams, params: ModelParams | None = None,
                  tg: TimeGrid | None = None) -> AdjointTrajectory:
    """Backward sweep ``A_n^T lam_n = M^T lam_{n+1} + b1 w_n (phi_n - target_q,n) e_phi``."""
    params = params or frozen.params
    tg = tg or frozen.time_grid
    steps, n_nodes = tg.steps, frozen.grid.n_nodes
    fz = frozen.frozen
    M = mass_matrix(params)
    tw = tg.weights
    dq, domega = tracking_residuals(frozen, cost)

    L = np.zeros((steps + 1, n_nodes, 3))
    L[steps, :, 1] = cost.b2 * domega / params.beta
    for n in range(steps, 0, -1):
        rhs = L[n] @ M  # row-wise M^T lam
        rhs[:, 1] += cost.b1 * tw[n] * dq[n]
        if not np.any(rhs):
            continue
        L[n - 1] = fz.factor(n, 1.0, adjoint=True).solve(rhs)
    return AdjointTrajectory(L[:, :, 0].copy(), L[:, :, 1].copy(), L[:, :, 2].copy())
