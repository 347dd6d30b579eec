import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chsparse.model import CostParams, ModelParams, SafeguardCounter, f1_log, f2, proliferation

SEP = 1e-6
band = st.floats(-1 + SEP, 1 - SEP, allow_nan=False)


def test_f1_values():
    assert f1_log(0.0, 0) == 0.0
    for r in (1.0, -1.0):
        assert f1_log(r, 0) == pytest.approx(2 * np.log(2), abs=1e-15)
    assert f1_log(1 - 1e-12, 0) == pytest.approx(2 * np.log(2), abs=1e-9)
    assert f1_log(0.0, 2) == 2.0


def test_f1_derivatives_against_closed_forms():
    r = np.linspace(-0.9, 0.9, 19)
    assert np.allclose(f1_log(r, 1), np.log((1 + r) / (1 - r)), atol=1e-14)
    assert np.allclose(f1_log(r, 2), 2 / (1 - r**2), atol=1e-12)
    assert np.allclose(f1_log(r, 3), -(1 + r) ** -2 + (1 - r) ** -2, atol=1e-10)


def test_f1_derivative_chain_by_finite_differences():
    r = np.linspace(-0.8, 0.8, 9)
    e = 1e-6
    for order in (1, 2, 3):
        fd = (f1_log(r + e, order - 1) - f1_log(r - e, order - 1)) / (2 * e)
        assert np.allclose(fd, f1_log(r, order), rtol=1e-6, atol=1e-6)


def test_f1_safeguard_counts_and_clamps():
    c = SafeguardCounter()
    inside = f1_log(np.array([0.0, 0.5]), 1, SEP, c)
    assert c.count == 0
    out = f1_log(np.array([0.999999, 1.5, -2.0]), 1, SEP, c)
    assert c.count == 3
    bound = 1 - SEP
    assert out[1] == pytest.approx(np.log((1 + bound) / (1 - bound)))
    assert np.all(np.isfinite(out)) and np.all(np.isfinite(inside))
    with pytest.raises(ValueError):
        f1_log(0.0, 4)


@settings(max_examples=100, deadline=None)
@given(band)
def test_f1_convexity_bound(r):
    assert f1_log(r, 2, SEP) >= 2.0


@pytest.mark.parametrize("sign", [1, -1])
def test_f1_singular_trend(sign):
    near = abs(f1_log(sign * (1 - SEP), 1, SEP))
    assert near > abs(f1_log(sign * 0.5, 1))
    assert np.sign(f1_log(sign * (1 - SEP), 1, SEP)) == sign


def test_f2_examples():
    assert f2(0.0, 0, k=1.0) == 1.0
    assert f2(0.5, 1, k=2.0) == -2.0
    assert f2(0.3, 2, k=2.0) == -4.0
    assert f2(0.7, 3, k=5.0) == 0.0
    with pytest.raises(ValueError):
        f2(0.0, 4)


def test_proliferation_examples():
    assert proliferation(0.3, 1, "constant", {"p0": 0.5}) == 0.0
    assert proliferation(0.3, 0, "constant", {"p0": 0.5}) == 0.5
    assert proliferation(0.0, 0, "logistic-smooth", {"p0": 0.8, "scale": 2.0}) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        proliferation(0.0, 0, "gompertz", {})
    with pytest.raises(ValueError):
        proliferation(0.0, 3, "constant", {"p0": 1.0})


def test_logistic_derivatives_by_finite_differences():
    rng = np.random.default_rng(0)
    r = rng.uniform(-3, 3, 50)
    coeffs = {"p0": 0.7, "scale": 0.8}
    e = 1e-5
    for order in (1, 2):
        fd = (proliferation(r + e, order - 1, "logistic-smooth", coeffs)
              - proliferation(r - e, order - 1, "logistic-smooth", coeffs)) / (2 * e)
        exact = proliferation(r, order, "logistic-smooth", coeffs)
        assert np.max(np.abs(fd - exact) / np.maximum(np.abs(exact), 1e-3)) <= 1e-6


@pytest.mark.parametrize("kind,coeffs", [("constant", {"p0": 0.4}), ("logistic-smooth", {"p0": 0.5, "scale": 0.3})])
def test_proliferation_bounded_nonnegative(kind, coeffs):
    p = ModelParams(p_kind=kind, p_coeffs=coeffs)
    r = np.linspace(-50, 50, 200001)
    assert np.all(p.P(r, 0) >= 0)
    bound = p.p_bound()
    for order in (0, 1, 2):
        assert np.max(np.abs(p.P(r, order))) <= bound * (1 + 1e-12)


@pytest.mark.parametrize("kwargs", [{"alpha": 0.0}, {"beta": -1.0}, {"chi": 0.0}, {"sep_eps": 0.2},
                                    {"p_kind": "linear"}, {"p_coeffs": {"p0": -1.0}}])
def test_model_params_validation(kwargs):
    with pytest.raises(ValueError):
        ModelParams(**kwargs)


def _cost(**over):
    args = dict(b1=1.0, b2=1.0, b3=1.0, kappa=0.1, target_q=np.zeros(3), target_omega=np.zeros(3),
                bounds=(-1, 1, -1, 1), h_field=np.ones(3))
    args.update(over)
    return CostParams(**args)


@pytest.mark.parametrize("over", [{"b1": -1.0}, {"b2": -0.1}, {"b3": 0.0}, {"kappa": 0.0}, {"bounds": (1, -1, -1, 1)},
                                  {"h_field": -np.ones(3)}, {"target_q": np.array([0, np.inf, 0])}])
def test_cost_params_validation(over):
    with pytest.raises(ValueError):
        _cost(**over)


def test_cost_params_straddle_flag():
    assert _cost().straddles_zero
    assert not _cost(bounds=(0.1, 1, -1, 1)).straddles_zero
    assert _cost().box(2) == (-1.0, 1.0)


def test_potential_sum():
    p = ModelParams(f2_k=1.5)
    r = np.array([-0.4, 0.0, 0.6])
    assert np.allclose(p.dF(r, 1), f1_log(r, 1) - 3.0 * r)
    assert np.allclose(p.dF(r, 3), f1_log(r, 3))
