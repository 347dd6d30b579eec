import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chsparse.grid import ScalarField, build_grid, inner_l2_q, integrate_omega, laplacian_neumann, time_weights


def test_spacing_1d():
    g = build_grid(1, [1.0], [5])
    assert g.spacing == (0.25,)


def test_node_count_2d():
    assert build_grid(2, [1.0, 2.0], [3, 5]).n_nodes == 15


@pytest.mark.parametrize("dim,extents,counts", [(1, [1.0], [2]), (1, [0.0], [5]), (1, [-1.0], [5]), (3, [1, 1, 1], [3, 3, 3])])
def test_invalid_grids_rejected(dim, extents, counts):
    with pytest.raises(ValueError):
        build_grid(dim, extents, counts)


def test_scalar_field_validates():
    g = build_grid(1, [1.0], [5])
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(4))
    with pytest.raises(ValueError):
        ScalarField(g, np.array([0, 1, np.nan, 0, 0]))


def test_laplacian_of_constant_is_zero():
    g = build_grid(2, [1.0, 2.0], [7, 9])
    out = laplacian_neumann(ScalarField(g, np.full(g.n_nodes, 3.7)))
    assert np.max(np.abs(out.values)) < 1e-10


def test_laplacian_cosine_second_order():
    errors = []
    for n in (33, 65, 129):
        g = build_grid(1, [1.0], [n])
        (x,) = g.coordinates()
        lap = laplacian_neumann(ScalarField(g, np.cos(np.pi * x))).values
        errors.append(np.max(np.abs(lap + np.pi**2 * np.cos(np.pi * x))))
    h = 1.0 / 128
    # leading truncation term of the central difference is pi^4 h^2 / 12
    assert errors[-1] <= 1.05 * np.pi**4 * h**2 / 12
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.02)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.02)


def test_laplacian_cosine_2d():
    g = build_grid(2, [1.0, 1.0], [65, 65])
    x, y = g.coordinates()
    f = np.cos(np.pi * x) * np.cos(np.pi * y)
    lap = laplacian_neumann(ScalarField(g, f)).values
    assert np.max(np.abs(lap + 2 * np.pi**2 * f)) < 2 * np.pi**4 / 12 / 64**2 * 1.05


def test_integrate_examples():
    g = build_grid(1, [1.0], [101])
    (x,) = g.coordinates()
    assert integrate_omega(ScalarField(g, np.ones(101))) == pytest.approx(1.0, abs=1e-14)
    assert integrate_omega(ScalarField(g, x)) == pytest.approx(0.5, abs=1e-12)
    # trapezoid error for x^2 is h^2/6 exactly
    assert integrate_omega(ScalarField(g, x**2)) - 1 / 3 == pytest.approx(0.01**2 / 6, rel=1e-8)


def test_inner_product_examples():
    g = build_grid(1, [1.0], [11])
    z = np.zeros((6, 11))
    assert inner_l2_q(z, z, 0.2, g) == 0.0
    one = np.ones((6, 11))
    assert inner_l2_q(one, one, 0.2, g) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        inner_l2_q(one, np.ones((5, 11)), 0.2, g)
    with pytest.raises(ValueError):
        inner_l2_q(one, one, 0.0, g)


def test_inner_product_matches_loop_oracle():
    rng = np.random.default_rng(3)
    g = build_grid(2, [1.0, 0.5], [5, 4])
    nt, dt = 7, 0.1
    a = rng.standard_normal((nt, g.n_nodes))
    b = rng.standard_normal((nt, g.n_nodes))
    hx, hy = g.spacing
    total = 0.0
    for k in range(nt):
        wt = dt * (0.5 if k in (0, nt - 1) else 1.0)
        for i in range(5):
            wx = hx * (0.5 if i in (0, 4) else 1.0)
            for j in range(4):
                wy = hy * (0.5 if j in (0, 3) else 1.0)
                total += wt * wx * wy * a[k, i * 4 + j] * b[k, i * 4 + j]
    assert inner_l2_q(a, b, dt, g) == pytest.approx(total, abs=1e-12)
    slab_total = dt * sum(g.integrate(a[k] * b[k]) for k in range(nt))
    assert inner_l2_q(a, b, dt, g, layout="slabs") == pytest.approx(slab_total, abs=1e-12)


def test_time_weights_sum():
    assert time_weights(11, 0.1).sum() == pytest.approx(1.0)


grids = st.sampled_from([build_grid(1, [1.0], [9]), build_grid(1, [2.5], [13]), build_grid(2, [1.0, 2.0], [5, 6])])
# fixed-precision values keep squared norms clear of underflow
finite = st.integers(-10**6, 10**6).map(lambda k: k / 1e5)


@settings(max_examples=40, deadline=None)
@given(grids, st.data())
def test_laplacian_self_adjoint(g, data):
    f = data.draw(arrays(float, g.n_nodes, elements=finite))
    h = data.draw(arrays(float, g.n_nodes, elements=finite))
    lhs = g.integrate(f * g.apply_laplacian(h))
    rhs = g.integrate(h * g.apply_laplacian(f))
    assert abs(lhs - rhs) <= 1e-10 * np.linalg.norm(f) * np.linalg.norm(h) + 1e-300


@settings(max_examples=40, deadline=None)
@given(grids, st.data())
def test_laplacian_integrates_to_zero(g, data):
    f = data.draw(arrays(float, g.n_nodes, elements=finite))
    assert abs(g.integrate(g.apply_laplacian(f))) <= 1e-10


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_inner_product_symmetric(data):
    g = build_grid(1, [1.0], [7])
    a = data.draw(arrays(float, (4, 7), elements=finite))
    b = data.draw(arrays(float, (4, 7), elements=finite))
    assert inner_l2_q(a, b, 0.25, g) == inner_l2_q(b, a, 0.25, g)
