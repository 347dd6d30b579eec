"""Desk-scale acceptance criteria on the shipped baseline problem.

Each test records a single pass/fail line (see the ``criterion`` fixture) before asserting.
"""

import dataclasses
import json

import numpy as np
import pytest

from chsparse import mms
from chsparse.cli import main
from chsparse.config import parse_config, shipped_config, shipped_config_names
from chsparse.diagnostics import gradient_check, hessian_check
from chsparse.optimality import (
    FREE,
    ConeClassification,
    classify_cone,
    coercivity_scan,
    growth_probe,
    multiplier_cases_hold,
    projection_residual,
    sample_critical_directions,
    sparsity_bands,
    variational_inequality,
)
from chsparse.optimizer import solve
from chsparse.state import InitialData, check_separation, solve_state

from conftest import small_problem

pytestmark = pytest.mark.slow


def test_01_forward_solver_order(criterion):
    t = mms.temporal_study(4)
    s = mms.spatial_study(4)
    ok = abs(t.order - 1.0) <= 0.2 and abs(s.order - 2.0) <= 0.3
    assert criterion(1, "forward solver order", ok,
                     f"temporal {t.order:.3f}, spatial {s.order:.3f}, 4 levels each")


def test_02_separation(criterion):
    worst = []
    for name in shipped_config_names():
        cfg = parse_config(shipped_config(name))
        traj = solve_state(cfg.params, cfg.cost, cfg.control, cfg.init, cfg.time_grid, options=cfg.solver)
        worst.append((name, *check_separation(traj)))
    ok = all(-1 < lo and hi < 1 and c == 0 for _, lo, hi, c in worst)
    detail = "; ".join(f"{n}: [{lo:.3f}, {hi:.3f}] clamps={c}" for n, lo, hi, c in worst)
    assert criterion(2, "separation property", ok, detail)


def test_03_gradient_consistency(criterion, baseline_cfg, baseline_problem):
    rep = gradient_check(baseline_problem, baseline_cfg.diagnostics["control"], n_dirs=5,
                         eps_list=(1e-4,), seed=baseline_cfg.seed)
    fd, gap = rep.errors["fd_relative"], rep.errors["duality_gap"]
    ok = fd <= 1e-3 and gap <= 1e-6
    assert criterion(3, "gradient consistency", ok, f"fd rel err {fd:.2e} at eps=1e-4, duality gap {gap:.2e}")


def test_04_hessian_consistency(criterion, baseline_cfg, baseline_problem):
    rep = hessian_check(baseline_problem, baseline_cfg.diagnostics["control"], n_dirs=3, eps=1e-3,
                        seed=baseline_cfg.seed)
    e = rep.errors
    ok = e["symmetry"] <= 1e-10 and e["route_relative"] <= 1e-4 and e["fd_relative"] <= 1e-2
    assert criterion(4, "hessian consistency", ok,
                     f"symmetry {e['symmetry']:.1e}, routes {e['route_relative']:.1e}, fd {e['fd_relative']:.1e}")


def test_05_optimizer_stationarity(criterion, baseline_cfg, baseline_solution):
    res, cfg = baseline_solution, baseline_cfg
    residual = res.history[-1].residual
    pr = projection_residual(res.control, res.adjoint, res.multipliers, cfg.cost, cfg.grid, cfg.time_grid.dt)
    objs = [r.objective for r in res.history]
    monotone = all(b <= a for a, b in zip(objs, objs[1:]))
    feasible = res.control.is_feasible(cfg.cost.bounds)
    ok = residual <= 1e-8 and max(pr) <= 1e-6 and monotone and feasible
    assert criterion(5, "optimizer stationarity", ok,
                     f"{len(res.history) - 1} iterations, residual {residual:.2e}, projection "
                     f"{pr[0]:.1e}/{pr[1]:.1e}, monotone={monotone}, feasible={feasible}")


def test_06_sparsity_equivalence(criterion, baseline_cfg, baseline_solution):
    res, cfg = baseline_solution, baseline_cfg
    bands = sparsity_bands(res.control, res.adjoint, cfg.cost)
    sup = max(np.max(np.abs(cfg.cost.h_field * res.adjoint.p_cells)), np.max(np.abs(res.adjoint.r_cells)))
    big = dataclasses.replace(cfg.cost, kappa=10 * sup)
    zero_run = solve(cfg.params, big, cfg.init, cfg.time_grid, cfg.optimizer, options=cfg.solver)
    ok = bands.passed and zero_run.control.is_zero()
    c1, c2 = bands.components
    assert criterion(6, "sparsity equivalence", ok,
                     f"band agreement {c1.band_agreement:.3f}/{c2.band_agreement:.3f}, zero fractions "
                     f"{c1.zero_fraction:.3f}/{c2.zero_fraction:.3f}, 10x kappa gives zero control: "
                     f"{zero_run.control.is_zero()}")


def test_07_multiplier_validity(criterion, baseline_cfg, baseline_solution):
    res, cfg = baseline_solution, baseline_cfg
    cases = multiplier_cases_hold(res.control, res.multipliers)
    vi = variational_inequality(res.control, res.gradient, res.multipliers, cfg.cost, cfg.grid,
                                cfg.time_grid.dt, 100, cfg.seed, 1e-6)
    ok = cases and vi.passed
    assert criterion(7, "multiplier validity", ok,
                     f"subdifferential cases {cases}, worst VI slack {vi.worst_slack:.2e} over {vi.samples}")


def test_08_second_order_certificate(criterion, baseline_cfg, baseline_solution):
    res, cfg = baseline_solution, baseline_cfg
    cls = classify_cone(res.control, res.adjoint, cfg.cost)
    dirs = sample_critical_directions(cls, 50, cfg.seed, cfg.grid, cfg.time_grid.dt)
    rep = coercivity_scan(res.state, res.adjoint, cfg.cost, cfg.params, dirs)

    eq = small_problem(b1=0.0, b2=0.0, phi_amp=0.0, p_kind="constant")
    z = np.zeros(eq.grid.n_nodes)
    eq = dataclasses.replace(eq, init=InitialData(eq.grid, z, z, z))
    traj = eq.state(eq.zero_control())
    adj = eq.adjoint(traj)
    shape = eq.zero_control().shape
    free = ConeClassification(np.full(shape, FREE, np.int8), np.full(shape, FREE, np.int8), 1e-6)
    eq_rep = coercivity_scan(traj, adj, eq.cost, eq.params,
                             sample_critical_directions(free, 10, 0, eq.grid, eq.dt))
    eq_err = max(abs(q - eq.cost.b3) for q in eq_rep.quotients)
    ok = rep.samples >= 50 and rep.min_quotient > 0 and eq_err <= 1e-8
    assert criterion(8, "second-order certificate", ok,
                     f"min quotient {rep.min_quotient:.4f} over {rep.samples} directions, "
                     f"equilibrium deviation from b3 {eq_err:.1e}")


def test_09_quadratic_growth(criterion, baseline_cfg, baseline_solution):
    res, cfg = baseline_solution, baseline_cfg
    rep = growth_probe(res.control, cfg.params, cfg.cost, cfg.init, cfg.time_grid, 1e-2, 100, cfg.seed,
                       options=cfg.solver)
    ok = rep.probes == 100 and rep.negative_gaps == 0
    assert criterion(9, "quadratic growth probe", ok,
                     f"{rep.negative_gaps} negative gaps in {rep.probes} probes, min normalised gap "
                     f"{rep.min_gap:.4f}")


def test_10_determinism(criterion, tmp_path):
    cfg = str(shipped_config("baseline"))
    runs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["optimize", "--config", cfg, "--out", str(out)]) == 0
        runs.append(json.loads((out / "manifest.json").read_text())["artifacts"])
    ok = runs[0] == runs[1]
    assert criterion(10, "determinism", ok, f"{len(runs[0])} artifacts with matching sha256 across two runs")
