"""Cost functional, reduced gradient and the second-order quadratic form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import Control, control_inner
from .grid import GridSpec
from .model import CostParams, ModelParams
from .sensitivity import (
    AdjointTrajectory,
    LinTrajectory,
    solve_adjoint,
    solve_bilinearized,
    solve_linearized,
    tracking_residuals,
)
from .state import DEFAULT_OPTIONS, InitialData, SolverOptions, StateTrajectory, TimeGrid, solve_state

__all__ = [
    "Control",
    "GradientPair",
    "ReducedProblem",
    "eval_sparsity",
    "eval_total",
    "eval_tracking",
    "g_directional",
    "gateaux_j1",
    "hessian_form",
    "hessian_form_bilinear",
    "smooth_gradient",
]

U_ZERO_TOL = 1e-12


@dataclass(eq=False)
class GradientPair:
    d1: np.ndarray
    d2: np.ndarray

    def as_control(self) -> Control:
        return Control(self.d1, self.d2)


def _grid_dt(traj: StateTrajectory) -> tuple[GridSpec, float]:
    return traj.grid, traj.time_grid.dt


def eval_tracking(traj: StateTrajectory, control: Control, cost: CostParams) -> float:
    grid, dt = _grid_dt(traj)
    dq, domega = tracking_residuals(traj, cost)
    term_q = grid.integrate(dq * dq) @ traj.time_grid.weights
    term_omega = grid.integrate(domega * domega)
    term_u = control_inner(control, control, grid, dt)
    return float(0.5 * (cost.b1 * term_q + cost.b2 * term_omega + cost.b3 * term_u))


def eval_sparsity(control: Control, grid: GridSpec, dt: float) -> float:
    return float(dt * np.sum((np.abs(control.u1) + np.abs(control.u2)) @ grid.weights))


def eval_total(traj: StateTrajectory, control: Control, cost: CostParams) -> float:
    grid, dt = _grid_dt(traj)
    return eval_tracking(traj, control, cost) + cost.kappa * eval_sparsity(control, grid, dt)


def smooth_gradient(adj: AdjointTrajectory, control: Control, cost: CostParams) -> GradientPair:
    """Pointwise ``d1 = -h p + b3 u1`` and ``d2 = r + b3 u2`` on the control slabs."""
    p, r = adj.p_cells, adj.r_cells
    if p.shape != control.shape:
        raise ValueError(f"adjoint slabs {p.shape} do not match control {control.shape}")
    h = np.broadcast_to(cost.h_field, control.shape)
    return GradientPair(-h * p + cost.b3 * control.u1, r + cost.b3 * control.u2)


def gradient_pairing(grad: GradientPair, h: Control, grid: GridSpec, dt: float) -> float:
    return control_inner(grad.as_control(), h, grid, dt)


def _tracking_derivative(frozen: StateTrajectory, cost: CostParams, lin: LinTrajectory) -> float:
    grid = frozen.grid
    dq, domega = tracking_residuals(frozen, cost)
    return float(cost.b1 * (grid.integrate(lin.xi * dq) @ frozen.time_grid.weights)
                 + cost.b2 * grid.integrate(lin.xi[-1] * domega))


def gateaux_j1(frozen: StateTrajectory, control: Control, cost: CostParams, h: Control,
               lin: LinTrajectory | None = None) -> float:
    """Directional derivative of the smooth reduced cost via one linearised solve."""
    if lin is None:
        lin = solve_linearized(frozen, h, cost)
    grid, dt = _grid_dt(frozen)
    return _tracking_derivative(frozen, cost, lin) + cost.b3 * control_inner(control, h, grid, dt)


def g_directional(u: Control, v: Control, grid: GridSpec, dt: float, zero_tol: float = U_ZERO_TOL) -> float:
    """Directional derivative of the sparsity term at ``u`` along ``v``."""
    total = 0.0
    for ui, vi in ((u.u1, v.u1), (u.u2, v.u2)):
        zero = np.abs(ui) <= zero_tol
        integrand = np.where(zero, np.abs(vi), np.sign(ui) * vi)
        total += dt * np.sum(integrand @ grid.weights)
    return float(total)


def _second_order_tracking(frozen, cost, lh, lk, h, k) -> float:
    grid, dt = _grid_dt(frozen)
    return float(cost.b1 * (grid.integrate(lh.xi * lk.xi) @ frozen.time_grid.weights)
                 + cost.b2 * grid.integrate(lh.xi[-1] * lk.xi[-1])
                 + cost.b3 * control_inner(h, k, grid, dt))


def hessian_form(frozen: StateTrajectory, adj: AdjointTrajectory, cost: CostParams,
                 params: ModelParams | None, h: Control, k: Control,
                 lin_h: LinTrajectory | None = None, lin_k: LinTrajectory | None = None) -> float:
    """Second derivative of the smooth reduced cost through the adjoint-weighted formula."""
    fz = frozen.frozen
    chi = (params or frozen.params).chi
    lh = lin_h if lin_h is not None else solve_linearized(frozen, h, cost)
    lk = lin_k if lin_k is not None else (lh if k is h else solve_linearized(frozen, k, cost))
    wh = lh.theta - chi * lh.xi - lh.eta
    wk = lk.theta - chi * lk.xi - lk.eta
    # state quantities live on the implicit levels 1..Nt, adjoint on the slabs
    s = slice(1, None)
    pr = adj.p_cells - adj.r_cells
    integrand = ((fz.dP[s] * (lk.xi[s] * wh[s] + lh.xi[s] * wk[s]) + fz.d2P[s] * fz.s[s] * lh.xi[s] * lk.xi[s]) * pr
                 - fz.d3F[s] * lh.xi[s] * lk.xi[s] * adj.q_cells)
    grid, dt = _grid_dt(frozen)
    coupling = dt * np.sum(integrand @ grid.weights)
    return float(coupling + _second_order_tracking(frozen, cost, lh, lk, h, k))


def hessian_form_bilinear(frozen: StateTrajectory, cost: CostParams, params: ModelParams | None,
                          h: Control, k: Control) -> float:
    """Same quadratic form through the second-order sensitivity solve."""
    lh = solve_linearized(frozen, h, cost)
    lk = lh if k is h else solve_linearized(frozen, k, cost)
    psi = solve_bilinearized(frozen, h, k, cost, lin_h=lh, lin_k=lk)
    return _tracking_derivative(frozen, cost, psi) + _second_order_tracking(frozen, cost, lh, lk, h, k)


@dataclass(eq=False)
class ReducedProblem:
    """Everything needed to evaluate the reduced cost as a function of the control."""

    params: ModelParams
    cost: CostParams
    init: InitialData
    tg: TimeGrid
    options: SolverOptions = field(default_factory=lambda: DEFAULT_OPTIONS)

    @property
    def grid(self) -> GridSpec:
        return self.init.grid

    @property
    def dt(self) -> float:
        return self.tg.dt

    def zero_control(self) -> Control:
        return Control.zeros(self.tg.steps, self.grid.n_nodes)

    def state(self, u: Control) -> StateTrajectory:
        return solve_state(self.params, self.cost, u, self.init, self.tg, options=self.options)

    def j1(self, u: Control) -> float:
        return eval_tracking(self.state(u), u, self.cost)

    def j(self, u: Control) -> float:
        return eval_total(self.state(u), u, self.cost)

    def adjoint(self, traj: StateTrajectory) -> AdjointTrajectory:
        return solve_adjoint(traj, self.cost, self.params, self.tg)

    def gradient(self, u: Control, traj: StateTrajectory | None = None):
        traj = traj or self.state(u)
        adj = self.adjoint(traj)
        return smooth_gradient(adj, u, self.cost), traj, adj

    def norm(self, u: Control) -> float:
        return float(np.sqrt(control_inner(u, u, self.grid, self.dt)))

    def inner(self, a: Control, b: Control) -> float:
        return control_inner(a, b, self.grid, self.dt)
