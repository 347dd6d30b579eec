import numpy as np
import pytest

from chsparse import mms
from chsparse.diagnostics import (
    CheckReport,
    continuity_check,
    fd_gradient_error,
    gradient_check,
    hessian_check,
    input_digest,
    mms_convergence,
)

from conftest import random_control


@pytest.fixture(scope="module")
def diag_point(baseline_cfg, baseline_problem):
    return baseline_problem, baseline_cfg.diagnostics["control"]


@pytest.fixture(scope="module")
def grad_report(diag_point):
    prob, u = diag_point
    return gradient_check(prob, u, n_dirs=3, eps_list=(1e-2, 1e-3, 1e-4, 1e-5), seed=0)


def test_gradient_check_passes_on_baseline(grad_report):
    assert grad_report.passed
    assert grad_report.errors["fd_relative"] <= 1e-3
    assert grad_report.errors["duality_gap"] <= 1e-6


def test_gradient_error_trend(grad_report):
    trend = grad_report.details["eps_trend"]
    e = [trend[k] for k in ("0.01", "0.001", "0.0001", "1e-05")]
    # truncation dominates at the largest step, rounding sets a small floor afterwards
    assert e[1] < e[0]
    assert max(e[1:]) <= 1e-6


def test_zero_direction_rejected(small):
    with pytest.raises(ValueError):
        fd_gradient_error(small, small.zero_control(), small.zero_control(), 1e-4)
    with pytest.raises(ValueError):
        gradient_check(small, small.zero_control(), directions=[small.zero_control()])


def test_hessian_check_on_baseline(diag_point):
    prob, u = diag_point
    rep = hessian_check(prob, u, n_dirs=2, eps=1e-3, seed=1)
    assert rep.passed
    assert rep.errors["symmetry"] <= 1e-10
    assert rep.errors["route_relative"] <= 1e-4
    assert rep.errors["fd_relative"] <= 1e-2


def test_continuity_check_on_baseline(diag_point):
    prob, u = diag_point
    rep = continuity_check(prob, u, (1e-1, 1e-2, 1e-3), seed=2)
    assert rep.passed
    for key in ("state", "adjoint", "derivative"):
        seq = rep.errors[key]
        assert seq[0] > seq[1] > seq[2]
    r = rep.errors["lipschitz_ratios"]
    assert max(r) <= 2 * min(r)


def test_continuity_zero_perturbation_is_exact(small):
    u = random_control(np.random.default_rng(3), small, 0.2).project(small.cost.bounds)
    rep = continuity_check(small, u, (0.0,), seed=4)
    assert rep.errors["state"] == [0.0]
    assert rep.errors["adjoint"] == [0.0]
    assert rep.errors["derivative"] == [0.0]
    assert rep.passed


def test_reports_are_reproducible(small):
    u = random_control(np.random.default_rng(5), small, 0.2).project(small.cost.bounds)
    a = gradient_check(small, u, n_dirs=2, eps_list=(1e-3,), seed=7).to_dict()
    b = gradient_check(small, u, n_dirs=2, eps_list=(1e-3,), seed=7).to_dict()
    a.pop("runtime")
    b.pop("runtime")
    assert a == b
    assert input_digest(u, 7) == input_digest(u.copy(), 7)
    assert input_digest(u, 7) != input_digest(u, 8)


@pytest.mark.parametrize("rep", ["grad_report"])
def test_report_pass_flag_matches_errors(rep, request):
    r = request.getfixturevalue(rep)
    assert r.passed == (max(r.errors.values()) <= r.tolerance)


def test_check_report_round_trip():
    r = CheckReport("x", "d", {"e": 1.0}, 2.0, True, 0.1)
    assert r.to_dict()["errors"] == {"e": 1.0}


def test_manufactured_orders():
    t = mms.temporal_study(4)
    s = mms.spatial_study(4)
    assert abs(t.order - 1.0) <= 0.2
    assert abs(s.order - 2.0) <= 0.3
    assert t.errors[-1] == min(t.errors) and s.errors[-1] == min(s.errors)


def test_mms_convergence_report():
    rep = mms_convergence(3)
    assert rep.passed
    with pytest.raises(ValueError):
        mms_convergence(1)


def test_order_fit():
    h = np.array([0.1, 0.05, 0.025])
    assert mms.fit_order(h, 3 * h**2) == pytest.approx(2.0, abs=1e-12)
