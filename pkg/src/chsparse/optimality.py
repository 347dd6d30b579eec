"""First- and second-order certificates at a computed stationary control."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .control import Control, control_norm
from .model import CostParams
from .objective import ReducedProblem, hessian_form
from .optimizer import MultiplierPair
from .sensitivity import AdjointTrajectory, solve_linearized
from .state import DEFAULT_OPTIONS

log = logging.getLogger(__name__)

FORCED_ZERO, NONNEG, NONPOS, FREE = 0, 1, 2, 3
LABELS = {FORCED_ZERO: "forced-zero", NONNEG: "nonneg", NONPOS: "nonpos", FREE: "free"}
BAND_TOL = 1e-4


class ConeDegenerate(RuntimeError):
    """The critical cone is the trivial cone ``{0}``."""


def _adjoint_parts(adj: AdjointTrajectory, cost: CostParams, shape):
    """Smooth first-order coefficients ``-h p`` and ``r`` on the control slabs."""
    h = np.broadcast_to(cost.h_field, shape)
    return -h * adj.p_cells, adj.r_cells


@dataclass
class ComponentBands:
    zero_fraction: float
    band_agreement: float
    violations: list
    dead_band_cells: int


@dataclass
class SparsityReport:
    components: tuple[ComponentBands, ComponentBands]
    band_tol: float

    @property
    def passed(self) -> bool:
        return all(c.band_agreement == 1.0 for c in self.components)


def sparsity_bands(u: Control, adj: AdjointTrajectory, cost: CostParams, band_tol: float = BAND_TOL) -> SparsityReport:
    """Check ``u_i = 0`` against ``|adjoint part| <= kappa`` cell by cell."""
    g1, g2 = _adjoint_parts(adj, cost, u.shape)
    kappa = cost.kappa
    out = []
    for ui, gi in ((u.u1, g1), (u.u2, g2)):
        a = np.abs(gi)
        dead = np.abs(a - kappa) <= band_tol * kappa
        agree = (ui == 0.0) == (a <= kappa)
        decided = ~dead
        n_decided = int(decided.sum())
        frac = float(agree[decided].mean()) if n_decided else 1.0
        bad = np.argwhere(decided & ~agree)
        out.append(ComponentBands(float(np.mean(ui == 0.0)), frac, [tuple(map(int, b)) for b in bad],
                                  int(dead.sum())))
    return SparsityReport(tuple(out), band_tol)


def projection_residual(u: Control, adj: AdjointTrajectory, lam: MultiplierPair, cost: CostParams,
                        grid, dt: float) -> tuple[float, float]:
    g1, g2 = _adjoint_parts(adj, cost, u.shape)
    lo1, hi1, lo2, hi2 = cost.bounds
    w = grid.weights
    r1 = u.u1 - np.clip(-(g1 + cost.kappa * lam.lam1) / cost.b3, lo1, hi1)
    r2 = u.u2 - np.clip(-(g2 + cost.kappa * lam.lam2) / cost.b3, lo2, hi2)
    return (float(np.sqrt(dt * np.sum((r1 * r1) @ w))), float(np.sqrt(dt * np.sum((r2 * r2) @ w))))


@dataclass(eq=False)
class ConeClassification:
    labels1: np.ndarray
    labels2: np.ndarray
    act_tol: float

    def counts(self) -> dict:
        return {f"u{i}": {LABELS[k]: int(np.sum(lab == k)) for k in LABELS}
                for i, lab in ((1, self.labels1), (2, self.labels2))}

    @property
    def degenerate(self) -> bool:
        return bool(np.all(self.labels1 == FORCED_ZERO) and np.all(self.labels2 == FORCED_ZERO))


def default_act_tol(cost: CostParams) -> float:
    return 1e-6 * (cost.kappa + cost.b3 * max(abs(b) for b in cost.bounds))


def _classify(ui, gi, b3, kappa, lo, hi, tol):
    d = gi + b3 * ui
    forced = np.abs(np.abs(d) - kappa) > tol
    at_zero = ui == 0.0
    nonneg = ~forced & ((ui == lo) | (at_zero & (np.abs(gi + kappa) <= tol)))
    nonpos = ~forced & ~nonneg & ((ui == hi) | (at_zero & (np.abs(gi - kappa) <= tol)))
    labels = np.full(ui.shape, FREE, dtype=np.int8)
    labels[forced] = FORCED_ZERO
    labels[nonneg] = NONNEG
    labels[nonpos] = NONPOS
    return labels


def classify_cone(u: Control, adj: AdjointTrajectory, cost: CostParams, act_tol: float | None = None,
                  kappa: float | None = None) -> ConeClassification:
    """Pointwise critical-cone restrictions.

    ``kappa`` overrides ``cost.kappa``; passing 0 gives the cone of the problem
    without the sparsity term.
    """
    tol = default_act_tol(cost) if act_tol is None else act_tol
    if not tol > 0:
        raise ValueError("act_tol must be positive")
    k = cost.kappa if kappa is None else kappa
    g1, g2 = _adjoint_parts(adj, cost, u.shape)
    lo1, hi1, lo2, hi2 = cost.bounds
    return ConeClassification(_classify(u.u1, g1, cost.b3, k, lo1, hi1, tol),
                              _classify(u.u2, g2, cost.b3, k, lo2, hi2, tol), tol)


def _restrict(z, labels):
    z = np.where(labels == FORCED_ZERO, 0.0, z)
    z = np.where(labels == NONNEG, np.abs(z), z)
    return np.where(labels == NONPOS, -np.abs(z), z)


def sample_critical_directions(cls: ConeClassification, n: int, seed, grid, dt: float,
                               max_retries: int = 100) -> list[Control]:
    """Random unit directions obeying the cone's sign and zero constraints."""
    if n < 1:
        raise ValueError("need at least one direction")
    if cls.degenerate:
        raise ConeDegenerate("every cell is forced to zero; the critical cone is {0}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dirs = []
    for _ in range(n):
        for _attempt in range(max_retries):
            v = Control(_restrict(rng.standard_normal(cls.labels1.shape), cls.labels1),
                        _restrict(rng.standard_normal(cls.labels2.shape), cls.labels2))
            nv = control_norm(v, grid, dt)
            if nv > 0:
                break
        else:
            raise ConeDegenerate(f"direction collapsed to zero after {max_retries} draws")
        dirs.append(v * (1.0 / nv))
    return dirs


@dataclass(eq=False)
class CoercivityReport:
    samples: int
    min_quotient: float
    median_quotient: float
    witness: Control
    quotients: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.min_quotient > 0


def coercivity_scan(frozen, adj, cost, params, dirs: list[Control]) -> CoercivityReport:
    """Rayleigh quotients of the second-order form over the supplied directions."""
    if not dirs:
        raise ValueError("need at least one direction")
    grid, dt = frozen.grid, frozen.time_grid.dt
    quotients = []
    for v in dirs:
        lin = solve_linearized(frozen, v, cost)
        q = hessian_form(frozen, adj, cost, params, v, v, lin_h=lin, lin_k=lin)
        quotients.append(q / control_norm(v, grid, dt) ** 2)
    qs = np.array(quotients)
    i = int(np.argmin(qs))
    if not np.all(np.isfinite(qs)):
        raise FloatingPointError("non-finite Rayleigh quotient")
    return CoercivityReport(len(dirs), float(qs[i]), float(np.median(qs)), dirs[i], quotients)


@dataclass
class GrowthProbeReport:
    probes: int
    eps: float
    min_gap: float
    negative_gaps: int
    failures: int
    gaps: list = field(default_factory=list)
    note: str = "sampled evidence of local quadratic growth, not a proof"

    @property
    def passed(self) -> bool:
        return self.negative_gaps == 0 and self.probes > 0


def growth_probe(u_star: Control, params, cost, init, tg, eps: float, n: int, seed,
                 directions: list[Control] | None = None, options=DEFAULT_OPTIONS,
                 min_radius_fraction: float = 0.1) -> GrowthProbeReport:
    """Normalised cost gaps ``(J(u) - J(u*)) / ||u - u*||^2`` at random feasible ``u``.

    Radii are drawn uniformly from ``[min_radius_fraction*eps, eps]``. When
    ``directions`` is given, every other probe moves along one of them, which
    exercises the flat part of the cost as well as generic directions.
    """
    if not eps > 0 or n < 1:
        raise ValueError("need eps > 0 and at least one probe")
    prob = ReducedProblem(params, cost, init, tg, options)
    grid, dt = prob.grid, prob.dt
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    j_star = prob.j(u_star)
    gaps = []
    failures = 0
    for i in range(n):
        tries = 0
        while True:
            tries += 1
            if directions and i % 2 == 1 and tries == 1:
                v = directions[(i // 2) % len(directions)]
            else:
                v = Control(rng.standard_normal(u_star.shape), rng.standard_normal(u_star.shape))
            radius = eps * rng.uniform(min_radius_fraction, 1.0)
            u = (u_star + v * (radius / control_norm(v, grid, dt))).project(cost.bounds)
            dist = control_norm(u - u_star, grid, dt)
            if dist > 0:
                break
        try:
            gaps.append((prob.j(u) - j_star) / dist**2)
        except (RuntimeError, FloatingPointError) as exc:
            log.warning("growth probe %d failed: %s", i, exc)
            failures += 1
    probes = len(gaps)
    arr = np.array(gaps) if gaps else np.array([np.nan])
    return GrowthProbeReport(probes, eps, float(np.min(arr)), int(np.sum(arr < 0)), failures, gaps)


def multiplier_cases_hold(u: Control, lam: MultiplierPair) -> bool:
    """``|lam| <= 1`` everywhere and ``lam = sign(u)`` wherever ``u`` is nonzero."""
    ok = True
    for ui, li in ((u.u1, lam.lam1), (u.u2, lam.lam2)):
        nz = ui != 0.0
        ok &= bool(np.all(np.abs(li) <= 1.0)) and bool(np.all(li[nz] == np.sign(ui[nz])))
    return ok


@dataclass
class VariationalReport:
    samples: int
    worst_slack: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_slack >= -self.tolerance


def variational_inequality(u: Control, grad, lam: MultiplierPair, cost: CostParams, grid, dt: float,
                           n: int = 100, seed=0, tol: float = 1e-6) -> VariationalReport:
    """Worst normalised value of ``<d + kappa lam, v - u>`` over random feasible ``v``.

    Competitors mix uniform draws from the box with vertices and small local moves.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo1, hi1, lo2, hi2 = cost.bounds
    a1 = grad.d1 + cost.kappa * lam.lam1
    a2 = grad.d2 + cost.kappa * lam.lam2
    w = grid.weights
    worst = np.inf
    for i in range(n):
        kind = i % 3
        if kind == 0:
            v1, v2 = rng.uniform(lo1, hi1, u.shape), rng.uniform(lo2, hi2, u.shape)
        elif kind == 1:
            v1 = np.where(rng.random(u.shape) < 0.5, lo1, hi1)
            v2 = np.where(rng.random(u.shape) < 0.5, lo2, hi2)
        else:
            v1 = np.clip(u.u1 + 1e-3 * rng.standard_normal(u.shape), lo1, hi1)
            v2 = np.clip(u.u2 + 1e-3 * rng.standard_normal(u.shape), lo2, hi2)
        d1, d2 = v1 - u.u1, v2 - u.u2
        dist = np.sqrt(dt * np.sum((d1 * d1 + d2 * d2) @ w))
        if dist == 0:
            continue
        val = dt * np.sum((a1 * d1 + a2 * d2) @ w)
        worst = min(worst, val / dist)
    return VariationalReport(n, float(worst), tol)
