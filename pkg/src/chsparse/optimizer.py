"""Proximal-gradient minimisation of the sparse reduced cost over the control box."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .control import Control
from .model import CostParams
from .objective import GradientPair, ReducedProblem, eval_total
from .sensitivity import AdjointTrajectory
from .state import DEFAULT_OPTIONS, StateTrajectory

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4


class StepCollapse(RuntimeError):
    pass


@dataclass
class OptimizerConfig:
    step_init: float | None = None  # None -> 1/b3
    backtrack_factor: float = 0.5
    max_outer_iters: int = 500
    stat_tol: float = 1e-8
    min_step: float = 1e-12

    def __post_init__(self):
        if self.step_init is not None and not self.step_init > 0:
            raise ValueError("step_init must be positive")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.max_outer_iters < 0 or not self.stat_tol > 0 or not self.min_step > 0:
            raise ValueError("iteration budget, stat_tol and min_step must be positive")

    def initial_step(self, cost: CostParams) -> float:
        return self.step_init if self.step_init is not None else 1.0 / cost.b3


@dataclass(frozen=True)
class IterateRecord:
    iteration: int
    objective: float
    residual: float
    step: float
    sparsity: tuple[float, float]


@dataclass(eq=False)
class MultiplierPair:
    lam1: np.ndarray
    lam2: np.ndarray


@dataclass(eq=False)
class OptimizeResult:
    control: Control
    state: StateTrajectory
    adjoint: AdjointTrajectory
    multipliers: MultiplierPair
    history: list[IterateRecord] = field(default_factory=list)
    status: str = "converged"
    gradient: GradientPair | None = None

    def __iter__(self):
        return iter((self.control, self.state, self.adjoint, self.multipliers, self.history))

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def prox_box_l1(w, threshold: float, lo: float, hi: float) -> np.ndarray:
    """Soft-threshold by ``threshold`` then clip into ``[lo, hi]``; ``|w| = threshold`` maps to 0."""
    if not lo < hi:
        raise ValueError(f"invalid bounds [{lo}, {hi}]")
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    w = np.asarray(w, dtype=float)
    shrunk = np.sign(w) * np.maximum(np.abs(w) - threshold, 0.0)
    return np.clip(shrunk, lo, hi)


def prox_step(u: Control, grad: GradientPair, cost: CostParams, tau: float) -> Control:
    lo1, hi1, lo2, hi2 = cost.bounds
    t = tau * cost.kappa
    return Control(prox_box_l1(u.u1 - tau * grad.d1, t, lo1, hi1),
                   prox_box_l1(u.u2 - tau * grad.d2, t, lo2, hi2))


def stationarity_residual(u: Control, grad: GradientPair, cost: CostParams, tau: float, grid, dt: float) -> float:
    if not tau > 0:
        raise ValueError("tau must be positive")
    diff = u - prox_step(u, grad, cost, tau)
    return float(np.sqrt(dt * np.sum((diff.u1**2 + diff.u2**2) @ grid.weights)) / tau)


def recover_multipliers(u: Control, grad: GradientPair, cost: CostParams, residual: float | None = None,
                        stat_tol: float | None = None, zero_tol: float = 0.0) -> MultiplierPair:
    """Subgradient of the sparsity term consistent with the first-order conditions."""
    if residual is not None and stat_tol is not None and residual > 10 * stat_tol:
        log.warning("stationarity residual %.3e exceeds 10*stat_tol; multipliers lack KKT meaning", residual)

    def pick(ui, di):
        free = np.clip(-di / cost.kappa, -1.0, 1.0)
        return np.where(np.abs(ui) > zero_tol, np.sign(ui), free)

    return MultiplierPair(pick(u.u1, grad.d1), pick(u.u2, grad.d2))


def _sparsity(u: Control) -> tuple[float, float]:
    return float(np.mean(u.u1 == 0.0)), float(np.mean(u.u2 == 0.0))


def solve(params, cost, init, tg, config: OptimizerConfig | None = None, u_start: Control | None = None,
          options=DEFAULT_OPTIONS) -> OptimizeResult:
    """Proximal-gradient iteration with Armijo backtracking on the full cost."""
    config = config or OptimizerConfig()
    prob = ReducedProblem(params, cost, init, tg, options)
    grid, dt = prob.grid, prob.dt
    u = prob.zero_control() if u_start is None else u_start
    if not u.is_feasible(cost.bounds):
        log.info("projecting infeasible starting control onto the box")
        u = u.project(cost.bounds)
    tau0 = config.initial_step(cost)

    traj = prob.state(u)
    grad, _, adj = prob.gradient(u, traj)
    J = eval_total(traj, u, cost)
    res = stationarity_residual(u, grad, cost, tau0, grid, dt)
    history = [IterateRecord(0, J, res, 0.0, _sparsity(u))]
    log.info("iter 0: J=%.12e residual=%.3e", J, res)
    status = "converged" if res <= config.stat_tol else "budget_exhausted"

    it = 0
    tau = tau0
    while res > config.stat_tol and it < config.max_outer_iters:
        it += 1
        # warm start from the last accepted step, allowing one expansion
        tau = min(tau0, tau / config.backtrack_factor)
        while True:
            u_new = prox_step(u, grad, cost, tau)
            step = u_new - u
            step_sq = prob.inner(step, step)
            traj_new = prob.state(u_new)
            J_new = eval_total(traj_new, u_new, cost)
            if J_new <= J - ARMIJO_C / tau * step_sq:
                break
            slack = 64 * np.finfo(float).eps * abs(J)
            if step_sq == 0.0 or (J_new <= J and J_new <= J - ARMIJO_C / tau * step_sq + slack):
                # required decrease is below the rounding level of the cost; stay monotone
                break
            tau *= config.backtrack_factor
            if tau < config.min_step:
                raise StepCollapse(f"iteration {it}: step {tau:.3e} below min_step {config.min_step:g}")
        u, traj, J = u_new, traj_new, J_new
        grad, _, adj = prob.gradient(u, traj)
        res = stationarity_residual(u, grad, cost, tau0, grid, dt)
        history.append(IterateRecord(it, J, res, tau, _sparsity(u)))
        log.info("iter %d: J=%.12e residual=%.3e tau=%.2e", it, J, res, tau)
        if res <= config.stat_tol:
            status = "converged"
    if status != "converged":
        log.warning("optimizer stopped after %d iterations with residual %.3e", it, res)
    lam = recover_multipliers(u, grad, cost, res, config.stat_tol)
    return OptimizeResult(u, traj, adj, lam, history, status, grad)
