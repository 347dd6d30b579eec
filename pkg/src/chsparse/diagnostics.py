"""Numerical self-checks: derivative consistency, continuity under perturbation, refinement orders."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import mms
from .control import Control
from .objective import ReducedProblem, gateaux_j1, gradient_pairing, hessian_form, hessian_form_bilinear
from .sensitivity import solve_linearized
from .state import state_l2_norm


@dataclass
class CheckReport:
    name: str
    digest: str
    errors: dict
    tolerance: float
    passed: bool
    runtime: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def input_digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, Control):
            h.update(np.ascontiguousarray(p.u1).tobytes())
            h.update(np.ascontiguousarray(p.u2).tobytes())
        elif isinstance(p, np.ndarray):
            h.update(np.ascontiguousarray(p).tobytes())
        else:
            h.update(json.dumps(p, sort_keys=True, default=repr).encode())
    return h.hexdigest()[:16]


def random_direction(rng: np.random.Generator, prob: ReducedProblem) -> Control:
    shape = (prob.tg.steps, prob.grid.n_nodes)
    h = Control(rng.standard_normal(shape), rng.standard_normal(shape))
    return h * (1.0 / prob.norm(h))


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), np.finfo(float).tiny)


def fd_gradient_error(prob: ReducedProblem, u: Control, h: Control, eps: float, grad=None) -> float:
    """Relative mismatch of the adjoint pairing against a central difference of the smooth cost."""
    if h.is_zero():
        raise ValueError("direction must be nonzero")
    if grad is None:
        grad, _, _ = prob.gradient(u)
    exact = gradient_pairing(grad, h, prob.grid, prob.dt)
    fd = (prob.j1(u + eps * h) - prob.j1(u - eps * h)) / (2 * eps)
    return _relative(fd, exact)


def gradient_check(prob: ReducedProblem, u: Control, n_dirs: int = 5,
                   eps_list=(1e-2, 1e-3, 1e-4, 1e-5), seed: int = 0, check_eps: float = 1e-4,
                   tol: float = 1e-3, duality_tol: float = 1e-6, directions=None) -> CheckReport:
    """Adjoint gradient against central differences, plus the sensitivity/adjoint duality gap."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    dirs = list(directions) if directions is not None else [random_direction(rng, prob) for _ in range(n_dirs)]
    if any(h.is_zero() for h in dirs):
        raise ValueError("direction must be nonzero")
    grad, traj, _ = prob.gradient(u)
    table = {eps: [fd_gradient_error(prob, u, h, eps, grad) for h in dirs] for eps in eps_list}
    if check_eps not in table:
        table[check_eps] = [fd_gradient_error(prob, u, h, check_eps, grad) for h in dirs]
    gaps = []
    for h in dirs:
        g_sens = gateaux_j1(traj, u, prob.cost, h)
        g_adj = gradient_pairing(grad, h, prob.grid, prob.dt)
        gaps.append(abs(g_sens - g_adj) / (1.0 + abs(g_sens)))
    fd_err = max(table[check_eps])
    gap = max(gaps)
    return CheckReport(
        "gradient_check", input_digest(u, seed, n_dirs, list(eps_list)),
        {"fd_relative": fd_err, "duality_gap": gap}, tol,
        bool(fd_err <= tol and gap <= duality_tol), time.perf_counter() - t0,
        {"eps_trend": {f"{e:g}": max(v) for e, v in sorted(table.items(), reverse=True)},
         "duality_tol": duality_tol},
    )


def hessian_check(prob: ReducedProblem, u: Control, n_dirs: int = 3, eps: float = 1e-3, seed: int = 0,
                  route_tol: float = 1e-4, fd_tol: float = 1e-2, sym_tol: float = 1e-10) -> CheckReport:
    """Quadratic form: symmetry, agreement of the two routes, and a second central difference."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    grad, traj, adj = prob.gradient(u)
    cost, params = prob.cost, prob.params
    j_mid = prob.j1(u)
    sym, route, fd = [], [], []
    for _ in range(n_dirs):
        h = random_direction(rng, prob)
        k = random_direction(rng, prob)
        lh = solve_linearized(traj, h, cost)
        lk = solve_linearized(traj, k, cost)
        qhk = hessian_form(traj, adj, cost, params, h, k, lin_h=lh, lin_k=lk)
        qkh = hessian_form(traj, adj, cost, params, k, h, lin_h=lk, lin_k=lh)
        sym.append(abs(qhk - qkh))
        route.append(_relative(hessian_form_bilinear(traj, cost, params, h, k), qhk))
        qhh = hessian_form(traj, adj, cost, params, h, h, lin_h=lh, lin_k=lh)
        second = (prob.j1(u + eps * h) - 2.0 * j_mid + prob.j1(u - eps * h)) / eps**2
        fd.append(_relative(second, qhh))
    errors = {"symmetry": max(sym), "route_relative": max(route), "fd_relative": max(fd)}
    passed = errors["symmetry"] <= sym_tol and errors["route_relative"] <= route_tol and errors["fd_relative"] <= fd_tol
    return CheckReport("hessian_check", input_digest(u, seed, n_dirs, eps), errors, fd_tol, bool(passed),
                       time.perf_counter() - t0, {"route_tol": route_tol, "sym_tol": sym_tol})


def _adjoint_distance(a, b, grid, weights) -> float:
    total = 0.0
    for name in ("p", "q", "r"):
        d = getattr(a, name) - getattr(b, name)
        total += np.sqrt(grid.integrate(d * d) @ weights)
    return float(total)


def _decreasing(seq, noise: float = 1.5, floor: float = 1e-12) -> bool:
    """Each entry below its predecessor, or both already at the rounding floor within ``noise``."""
    return all(b < a or (a <= floor and b <= noise * max(a, floor)) for a, b in zip(seq, seq[1:]))


def continuity_check(prob: ReducedProblem, u: Control, deltas=(1e-1, 1e-2, 1e-3), seed: int = 0,
                     ratio_band: float = 2.0) -> CheckReport:
    """State, adjoint and derivative values along ``u + delta w`` as ``delta`` shrinks."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    shape = u.shape
    w = Control(rng.uniform(-1, 1, shape), rng.uniform(-1, 1, shape))
    v = random_direction(rng, prob)
    grad, traj, adj = prob.gradient(u)
    base_deriv = gateaux_j1(traj, u, prob.cost, v)
    weights = prob.tg.weights
    states, adjoints, derivs, ratios = [], [], [], []
    for d in deltas:
        uk = u + d * w
        tk = prob.state(uk)
        ak = prob.adjoint(tk)
        states.append(state_l2_norm(tk, traj))
        adjoints.append(_adjoint_distance(ak, adj, prob.grid, weights))
        derivs.append(abs(gateaux_j1(tk, uk, prob.cost, v) - base_deriv))
        if d > 0:
            ratios.append(states[-1] / (d * prob.norm(w)))
    nonzero = [d for d in deltas if d > 0]
    lipschitz_ok = not ratios or max(ratios) <= ratio_band * min(ratios)
    zero_ok = all(s == 0 and a == 0 and g == 0
                  for d, s, a, g in zip(deltas, states, adjoints, derivs) if d == 0)
    trend_ok = all(_decreasing([seq[i] for i, d in enumerate(deltas) if d > 0])
                   for seq in (states, adjoints, derivs)) if len(nonzero) > 1 else True
    errors = {"state": states, "adjoint": adjoints, "derivative": derivs, "lipschitz_ratios": ratios}
    return CheckReport("continuity_check", input_digest(u, seed, list(deltas)), errors, ratio_band,
                       bool(lipschitz_ok and zero_ok and trend_ok), time.perf_counter() - t0,
                       {"deltas": list(deltas)})


def mms_convergence(levels: int = 4, temporal_target=(1.0, 0.2), spatial_target=(2.0, 0.3)) -> CheckReport:
    """Observed orders of the forward solver under separate dt and spacing refinement."""
    if levels < 2:
        raise ValueError("need at least two refinement levels")
    t0 = time.perf_counter()
    tstudy = mms.temporal_study(levels)
    sstudy = mms.spatial_study(levels)
    t_ok = abs(tstudy.order - temporal_target[0]) <= temporal_target[1]
    s_ok = abs(sstudy.order - spatial_target[0]) <= spatial_target[1]
    finest_ok = (tstudy.errors[-1] == min(tstudy.errors) and sstudy.errors[-1] == min(sstudy.errors))
    errors = {"temporal_order": tstudy.order, "spatial_order": sstudy.order,
              "temporal_errors": tstudy.errors, "spatial_errors": sstudy.errors}
    return CheckReport("mms_convergence", input_digest(levels), errors, temporal_target[1],
                       bool(t_ok and s_ok and finest_ok), time.perf_counter() - t0,
                       {"dt": tstudy.sizes, "spacing": sstudy.sizes,
                        "temporal_target": list(temporal_target), "spatial_target": list(spatial_target)})
