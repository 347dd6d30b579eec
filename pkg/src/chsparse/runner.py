"""Experiment orchestration: run a command, write fields, reports and a manifest.

Everything except ``manifest.json`` is a pure function of config and seed, so
repeated runs produce byte-identical artifacts. Timings and versions live in
the manifest only.
"""

from __future__ import annotations

import hashlib
import json
import logging
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, kernels
from .config import ExperimentConfig
from .diagnostics import continuity_check, gradient_check, hessian_check, mms_convergence
from .io import write_csv, write_field
from .linalg import LinearSolverBreakdown
from .objective import ReducedProblem
from .optimality import (
    ConeDegenerate,
    classify_cone,
    coercivity_scan,
    growth_probe,
    multiplier_cases_hold,
    projection_residual,
    sample_critical_directions,
    sparsity_bands,
    variational_inequality,
)
from .optimizer import StepCollapse, solve
from .state import NewtonDivergence, SeparationBreach, check_separation, solve_state

log = logging.getLogger(__name__)

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG, EXIT_CERT = 0, 1, 2, 3
SOLVER_ERRORS = (NewtonDivergence, SeparationBreach, LinearSolverBreakdown, StepCollapse, FloatingPointError)


@dataclass
class RunContext:
    cfg: ExperimentConfig
    command: str
    out: Path
    artifacts: list = field(default_factory=list)
    report: dict = field(default_factory=dict)
    partial: bool = False

    def dump(self, name: str, values) -> None:
        dt = self.cfg.time_grid.dt
        counts = self.cfg.grid.counts
        if "binary" in self.cfg.formats:
            self.artifacts.append(write_field(self.out / f"{name}.chsf", values, counts, dt).name)
        if "csv" in self.cfg.formats:
            self.artifacts.append(write_csv(self.out / f"{name}.csv", values, dt).name)


def _problem(cfg: ExperimentConfig) -> ReducedProblem:
    return ReducedProblem(cfg.params, cfg.cost, cfg.init, cfg.time_grid, cfg.solver)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return repr(obj)


def _summary_lines(prefix: str, obj) -> list[str]:
    if isinstance(obj, dict):
        lines = []
        for k in sorted(obj):
            lines += _summary_lines(f"{prefix}.{k}" if prefix else str(k), obj[k])
        return lines
    if isinstance(obj, list) and len(obj) > 8:
        return [f"{prefix} = [{len(obj)} values]"]
    return [f"{prefix} = {obj}"]


def _finish(ctx: RunContext, status: int, t0: float) -> int:
    report = _jsonable({"command": ctx.command, "exit_code": status, "seed": ctx.cfg.seed, **ctx.report})
    (ctx.out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (ctx.out / "summary.txt").write_text("\n".join(_summary_lines("", report)) + "\n")
    hashes = {}
    for name in sorted(set(ctx.artifacts) | {"report.json", "summary.txt"}):
        hashes[name] = hashlib.sha256((ctx.out / name).read_bytes()).hexdigest()
    manifest = {
        "command": ctx.command,
        "exit_code": status,
        "partial": ctx.partial,
        "seed": ctx.cfg.seed,
        "config": _jsonable(ctx.cfg.raw),
        "config_source": str(ctx.cfg.source) if ctx.cfg.source else None,
        "artifacts": hashes,
        "wall_time_s": time.perf_counter() - t0,
        "versions": {"chsparse": __version__, "kernel_backend": kernels.BACKEND, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
    }
    (ctx.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return status


def _simulate(ctx: RunContext) -> int:
    cfg = ctx.cfg
    traj = solve_state(cfg.params, cfg.cost, cfg.control, cfg.init, cfg.time_grid, options=cfg.solver)
    for name in ("mu", "phi", "sigma"):
        ctx.dump(name, getattr(traj, name))
    lo, hi, clamps = check_separation(traj)
    ok = -1.0 < lo and hi < 1.0 and clamps == 0
    ctx.report["separation"] = {"phi_min": lo, "phi_max": hi, "clamp_count": clamps, "passed": ok}
    ctx.report["newton"] = {"max_iterations": max(traj.newton_iterations), "max_residual": traj.max_residual}
    return EXIT_OK if ok else EXIT_CERT


def _optimize_core(ctx: RunContext):
    cfg = ctx.cfg
    res = solve(cfg.params, cfg.cost, cfg.init, cfg.time_grid, cfg.optimizer, cfg.control, options=cfg.solver)
    u = res.control
    for name, arr in (("u1", u.u1), ("u2", u.u2), ("mu", res.state.mu), ("phi", res.state.phi),
                      ("sigma", res.state.sigma), ("p", res.adjoint.p), ("q", res.adjoint.q), ("r", res.adjoint.r),
                      ("lam1", res.multipliers.lam1), ("lam2", res.multipliers.lam2)):
        ctx.dump(name, arr)
    hist = ctx.out / "history.csv"
    with open(hist, "w") as fh:
        fh.write("iteration,objective,residual,step,zero_fraction_u1,zero_fraction_u2\n")
        for r in res.history:
            fh.write(f"{r.iteration},{r.objective!r},{r.residual!r},{r.step!r},{r.sparsity[0]!r},{r.sparsity[1]!r}\n")
    ctx.artifacts.append(hist.name)
    last = res.history[-1]
    objs = [r.objective for r in res.history]
    ctx.partial = not res.converged
    ctx.report["optimizer"] = {
        "status": res.status, "iterations": last.iteration, "objective": last.objective,
        "stationarity_residual": last.residual, "zero_fraction": list(last.sparsity),
        "monotone": all(b <= a for a, b in zip(objs, objs[1:])),
        "feasible": u.is_feasible(cfg.cost.bounds),
    }
    lo, hi, clamps = check_separation(res.state)
    ctx.report["separation"] = {"phi_min": lo, "phi_max": hi, "clamp_count": clamps}
    return res


def _optimize(ctx: RunContext) -> int:
    _optimize_core(ctx)
    return EXIT_OK


def _certify(ctx: RunContext) -> int:
    cfg = ctx.cfg
    res = _optimize_core(ctx)
    cert = cfg.certification
    rng = np.random.default_rng(cfg.seed)
    u, adj, lam, cost = res.control, res.adjoint, res.multipliers, cfg.cost
    grid, dt = cfg.grid, cfg.time_grid.dt
    checks = {}

    checks["stationarity"] = {"residual": res.history[-1].residual, "tol": cfg.optimizer.stat_tol,
                              "passed": res.converged}
    pr = projection_residual(u, adj, lam, cost, grid, dt)
    checks["projection"] = {"residuals": list(pr), "tol": cert["projection_tol"],
                            "passed": max(pr) <= cert["projection_tol"]}
    checks["multipliers"] = {"passed": multiplier_cases_hold(u, lam)}
    vi = variational_inequality(u, res.gradient, lam, cost, grid, dt, cert["vi_samples"], rng, cert["vi_tol"])
    checks["variational_inequality"] = {"samples": vi.samples, "worst_slack": vi.worst_slack,
                                        "tol": vi.tolerance, "passed": vi.passed}
    sb = sparsity_bands(u, adj, cost, cert["band_tol"])
    checks["sparsity_bands"] = {
        f"u{i}": {"zero_fraction": c.zero_fraction, "band_agreement": c.band_agreement,
                  "violations": len(c.violations), "dead_band_cells": c.dead_band_cells}
        for i, c in enumerate(sb.components, start=1)}
    checks["sparsity_bands"]["passed"] = sb.passed

    cls = classify_cone(u, adj, cost, cert["act_tol"])
    checks["cone"] = {"act_tol": cls.act_tol, "counts": cls.counts()}
    try:
        dirs = sample_critical_directions(cls, cert["n_directions"], rng, grid, dt)
    except ConeDegenerate as exc:
        dirs = []
        checks["coercivity"] = {"degenerate": True, "note": str(exc), "passed": True}
    if dirs:
        cr = coercivity_scan(res.state, adj, cost, cfg.params, dirs)
        checks["coercivity"] = {"samples": cr.samples, "min_quotient": cr.min_quotient,
                                "median_quotient": cr.median_quotient, "passed": cr.passed}
        ctx.dump("coercivity_witness_u1", cr.witness.u1)
        ctx.dump("coercivity_witness_u2", cr.witness.u2)
    gp = growth_probe(u, cfg.params, cost, cfg.init, cfg.time_grid, cert["growth_eps"], cert["growth_probes"], rng,
                      directions=dirs or None, options=cfg.solver)
    checks["growth"] = {"probes": gp.probes, "eps": gp.eps, "min_gap": gp.min_gap,
                        "negative_gaps": gp.negative_gaps, "failures": gp.failures, "note": gp.note,
                        "passed": gp.passed}
    ctx.report["certificates"] = checks
    ok = all(c["passed"] for k, c in checks.items() if isinstance(c, dict) and "passed" in c)
    ctx.report["certified"] = ok
    return EXIT_OK if ok else EXIT_CERT


def _diagnostics(ctx: RunContext) -> int:
    cfg = ctx.cfg
    d = cfg.diagnostics
    prob = _problem(cfg)
    u = d["control"]
    reports = [
        gradient_check(prob, u, d["gradient_dirs"], d["eps_list"], cfg.seed),
        hessian_check(prob, u, d["hessian_dirs"], d["hessian_eps"], cfg.seed),
        continuity_check(prob, u, d["continuity_deltas"], cfg.seed),
        mms_convergence(d["mms_levels"]),
    ]
    return _emit_checks(ctx, reports)


def _mms(ctx: RunContext) -> int:
    return _emit_checks(ctx, [mms_convergence(ctx.cfg.diagnostics["mms_levels"])])


def _emit_checks(ctx: RunContext, reports) -> int:
    ctx.report["checks"] = {}
    for r in reports:
        body = r.to_dict()
        body.pop("runtime")
        ctx.report["checks"][r.name] = body
    ok = all(r.passed for r in reports)
    ctx.report["passed"] = ok
    return EXIT_OK if ok else EXIT_CERT


COMMANDS = {"simulate": _simulate, "optimize": _optimize, "certify": _certify,
            "diagnostics": _diagnostics, "mms": _mms}


def run(command: str, cfg: ExperimentConfig) -> int:
    """Execute ``command`` and write its artifacts into ``cfg.out_dir``; returns the exit code."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = RunContext(cfg, command, out)
    try:
        status = COMMANDS[command](ctx)
    except SOLVER_ERRORS as exc:
        log.error("%s failed: %s", command, exc)
        ctx.partial = True
        ctx.report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        status = EXIT_SOLVER
    return _finish(ctx, status, t0)


def run_simulate(cfg: ExperimentConfig) -> int:
    return run("simulate", cfg)


def run_optimize(cfg: ExperimentConfig) -> int:
    return run("optimize", cfg)


def run_certify(cfg: ExperimentConfig) -> int:
    return run("certify", cfg)


def run_diagnostics(cfg: ExperimentConfig) -> int:
    return run("diagnostics", cfg)


def run_mms(cfg: ExperimentConfig) -> int:
    return run("mms", cfg)
