"""Fully implicit Euler / Newton forward solver for the tumour state system.

Per step the dt-scaled residual of

    alpha mu_t + phi_t - Lap mu    = P(phi)(sigma + chi(1-phi) - mu) - h u1 + f1
    beta phi_t - Lap phi + F'(phi) = mu + chi sigma + f2
    sigma_t - Lap sigma            = -chi Lap phi - P(phi)(sigma + chi(1-phi) - mu) + u2 + f3

is driven to zero by a monolithic three-field Newton iteration.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .control import Control, control_norm
from .grid import GridSpec, time_weights
from .linalg import BlockOperator
from .model import CostParams, ModelParams, SafeguardCounter

log = logging.getLogger(__name__)


class NewtonDivergence(RuntimeError):
    pass


class SeparationBreach(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    steps: int

    def __post_init__(self):
        if not self.t_final > 0:
            raise ValueError("t_final must be positive")
        if int(self.steps) < 1:
            raise ValueError("need at least one time step")

    @property
    def dt(self) -> float:
        return self.t_final / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.steps + 1)

    @property
    def weights(self) -> np.ndarray:
        return time_weights(self.steps + 1, self.dt)


@dataclass(frozen=True, eq=False)
class InitialData:
    grid: GridSpec
    mu0: np.ndarray
    phi0: np.ndarray
    sigma0: np.ndarray

    def __post_init__(self):
        for name in ("mu0", "phi0", "sigma0"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.size != self.grid.n_nodes or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite nodal field on the grid")
            object.__setattr__(self, name, arr)
        if np.max(np.abs(self.phi0)) >= 1.0:
            raise ValueError("initial phase must satisfy max|phi0| < 1")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "InitialData":
        z = np.zeros(grid.n_nodes)
        return cls(grid, z, z, z)

    def stacked(self) -> np.ndarray:
        return np.stack([self.mu0, self.phi0, self.sigma0], axis=1)


@dataclass
class SolverOptions:
    newton_tol: float = 1e-10
    max_iters: int = 50
    clamp_budget: int = 10_000
    guess: str = "previous"  # or "extrapolated"
    max_halvings: int = 30


DEFAULT_OPTIONS = SolverOptions()


def mass_matrix(params: ModelParams) -> np.ndarray:
    """Coupling of the time derivatives: rows are the three equations."""
    return np.array([[params.alpha, 1.0, 0.0], [0.0, params.beta, 0.0], [0.0, 0.0, 1.0]])


def laplace_coupling(params: ModelParams) -> np.ndarray:
    """Coefficient of Lap in ``K``: ``-Lap`` on the diagonal and ``+chi Lap phi`` in row 3."""
    return np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, params.chi, -1.0]])


def local_coupling(params: ModelParams, P, dPs, d2F, lam1: float = 1.0) -> np.ndarray:
    """Pointwise part of the linearised operator ``K`` (one 3x3 block per node).

    ``dPs`` is ``P'(phi*)(sigma* + chi(1 - phi*) - mu*)``.
    """
    chi = params.chi
    n = np.shape(P)[0]
    K = np.zeros((n, 3, 3))
    g = dPs - chi * P
    K[:, 0, 0] = lam1 * P
    K[:, 0, 1] = -lam1 * g
    K[:, 0, 2] = -lam1 * P
    K[:, 1, 0] = -1.0
    K[:, 1, 1] = lam1 * d2F
    K[:, 1, 2] = -lam1 * chi
    K[:, 2, 0] = -lam1 * P
    K[:, 2, 1] = lam1 * g
    K[:, 2, 2] = lam1 * P
    return K


def step_operator(grid, params, dt, P, dPs, d2F, lam1: float = 1.0) -> BlockOperator:
    """``M + dt K`` for one implicit step."""
    coef = mass_matrix(params)[None] + dt * local_coupling(params, P, dPs, d2F, lam1)
    return BlockOperator(grid, coef, dt * laplace_coupling(params))


@dataclass(eq=False)
class StateTrajectory:
    grid: GridSpec
    time_grid: TimeGrid
    params: ModelParams
    mu: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray
    clamp_count: int = 0
    newton_iterations: list = field(default_factory=list)
    max_residual: float = 0.0

    def stacked(self, n: int) -> np.ndarray:
        return np.stack([self.mu[n], self.phi[n], self.sigma[n]], axis=1)

    @cached_property
    def frozen(self) -> "FrozenState":
        return FrozenState(self)


class FrozenState:
    """Coefficient fields of the linearised system, evaluated once per time level."""

    def __init__(self, traj: StateTrajectory):
        p = traj.params
        phi, mu, sigma = traj.phi, traj.mu, traj.sigma
        self.traj = traj
        self.counter = SafeguardCounter()
        self.P = p.P(phi, 0)
        self.dP = p.P(phi, 1)
        self.d2P = p.P(phi, 2)
        self.s = sigma + p.chi * (1.0 - phi) - mu
        self.d2F = p.dF(phi, 2, self.counter)
        self.d3F = p.dF(phi, 3, self.counter)
        self._ops: dict = {}
        self._factors: dict = {}

    def operator(self, n: int, lam1: float = 1.0, adjoint: bool = False) -> BlockOperator:
        key = (n, lam1, adjoint)
        if key not in self._ops:
            t = self.traj
            op = step_operator(t.grid, t.params, t.time_grid.dt, self.P[n], self.dP[n] * self.s[n],
                               self.d2F[n], lam1)
            self._ops[key] = op.adjoint() if adjoint else op
        return self._ops[key]

    def factor(self, n: int, lam1: float = 1.0, adjoint: bool = False):
        key = (n, lam1, adjoint)
        if key not in self._factors:
            self._factors[key] = self.operator(n, lam1, adjoint).factor()
        return self._factors[key]


def _residual(x, x_old, grid, params, dt, src, counter):
    mu, phi, sigma = x[:, 0], x[:, 1], x[:, 2]
    lap = grid.apply_laplacian(x.T).T
    N = params.P(phi, 0) * (sigma + params.chi * (1.0 - phi) - mu)
    d = x - x_old
    R = np.empty_like(x)
    R[:, 0] = params.alpha * d[:, 0] + d[:, 1] - dt * (lap[:, 0] + N + src[:, 0])
    R[:, 1] = params.beta * d[:, 1] - dt * (lap[:, 1] - params.dF(phi, 1, counter) + mu
                                            + params.chi * sigma + src[:, 1])
    R[:, 2] = d[:, 2] - dt * (lap[:, 2] - params.chi * lap[:, 1] - N + src[:, 2])
    return R


def _jacobian(x, grid, params, dt, counter) -> BlockOperator:
    mu, phi, sigma = x[:, 0], x[:, 1], x[:, 2]
    s = sigma + params.chi * (1.0 - phi) - mu
    return step_operator(grid, params, dt, params.P(phi, 0), params.P(phi, 1) * s,
                         params.dF(phi, 2, counter))


def solve_state(params: ModelParams, cost: CostParams, control: Control, init: InitialData,
                tg: TimeGrid, forcing=None, options: SolverOptions = DEFAULT_OPTIONS) -> StateTrajectory:
    """Run the nonlinear forward solve and return the full trajectory.

    ``forcing`` is an optional triple of (Nt+1, n) arrays added to the three
    equations, used for manufactured-solution checks.
    """
    grid = init.grid
    n_nodes, steps, dt = grid.n_nodes, tg.steps, tg.dt
    if control.shape != (steps, n_nodes):
        raise ValueError(f"control shape {control.shape} does not match ({steps}, {n_nodes})")
    if not control.is_feasible(cost.bounds):
        log.warning("control violates the box constraints")
    h = np.broadcast_to(cost.h_field, (steps, n_nodes))
    if forcing is not None:
        forcing = [np.broadcast_to(np.asarray(f, dtype=float), (steps + 1, n_nodes)) for f in forcing]

    counter = SafeguardCounter()
    X = np.empty((steps + 1, n_nodes, 3))
    X[0] = init.stacked()
    iters = []
    worst = 0.0
    for n in range(1, steps + 1):
        src = np.zeros((n_nodes, 3))
        src[:, 0] = -h[n - 1] * control.u1[n - 1]
        src[:, 2] = control.u2[n - 1]
        if forcing is not None:
            src += np.stack([f[n] for f in forcing], axis=1)
        x_old = X[n - 1]
        if options.guess == "extrapolated" and n >= 2:
            x = 2.0 * X[n - 1] - X[n - 2]
        else:
            x = x_old.copy()
        R = _residual(x, x_old, grid, params, dt, src, counter)
        rnorm = np.max(np.abs(R))
        k = 0
        while rnorm > options.newton_tol:
            if k >= options.max_iters:
                raise NewtonDivergence(
                    f"step {n}: residual {rnorm:.3e} above tol {options.newton_tol:g} after {k} iterations")
            delta = _jacobian(x, grid, params, dt, counter).factor().solve(-R)
            t = 1.0
            for _ in range(options.max_halvings):
                x_try = x + t * delta
                R_try = _residual(x_try, x_old, grid, params, dt, src, counter)
                r_try = np.max(np.abs(R_try))
                if r_try <= rnorm or not np.isfinite(rnorm):
                    break
                t *= 0.5
            if not np.isfinite(r_try):
                raise NewtonDivergence(f"step {n}: non-finite residual")
            x, R, rnorm = x_try, R_try, r_try
            k += 1
            if counter.count > options.clamp_budget:
                raise SeparationBreach(
                    f"step {n}: {counter.count} safeguard activations exceed budget {options.clamp_budget}")
        iters.append(k)
        worst = max(worst, rnorm)
        X[n] = x
    if counter.count > options.clamp_budget:
        raise SeparationBreach(f"{counter.count} safeguard activations exceed budget {options.clamp_budget}")
    return StateTrajectory(grid, tg, params, X[:, :, 0].copy(), X[:, :, 1].copy(), X[:, :, 2].copy(),
                           clamp_count=counter.count, newton_iterations=iters, max_residual=float(worst))


def check_separation(traj: StateTrajectory) -> tuple[float, float, int]:
    return float(traj.phi.min()), float(traj.phi.max()), int(traj.clamp_count)


def state_l2_norm(traj_a: StateTrajectory, traj_b: StateTrajectory) -> float:
    """Sum of the discrete L2(Q) norms of the three state differences."""
    g, w = traj_a.grid, traj_a.time_grid.weights
    total = 0.0
    for name in ("mu", "phi", "sigma"):
        d = getattr(traj_a, name) - getattr(traj_b, name)
        total += np.sqrt(g.integrate(d * d) @ w)
    return float(total)


def stability_ratio(params, cost, init, tg, uA: Control, uB: Control, options=DEFAULT_OPTIONS) -> float:
    """``||S(uA) - S(uB)|| / ||uA - uB||``, a bounded-constant diagnostic."""
    du = control_norm(uA - uB, init.grid, tg.dt)
    if du == 0.0:
        raise ValueError("stability ratio needs two distinct controls")
    a = solve_state(params, cost, uA, init, tg, options=options)
    b = solve_state(params, cost, uB, init, tg, options=options)
    return state_l2_norm(a, b) / du
