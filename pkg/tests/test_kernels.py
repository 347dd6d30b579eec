import numpy as np
import pytest

from chsparse import _fallback, kernels
from chsparse.grid import build_grid
from chsparse.linalg import BlockOperator, LinearSolverBreakdown

try:
    from chsparse import _kernels as compiled
except ImportError:  # pragma: no cover - build without a C compiler
    compiled = None


def _random_blocks(rng, n, shift=8.0):
    lower = rng.standard_normal((n, 3, 3))
    upper = rng.standard_normal((n, 3, 3))
    diag = rng.standard_normal((n, 3, 3)) + shift * np.eye(3)
    lower[0] = 0.0
    upper[-1] = 0.0
    return lower, diag, upper


def _dense(lower, diag, upper):
    n = diag.shape[0]
    A = np.zeros((3 * n, 3 * n))
    for i in range(n):
        A[3 * i:3 * i + 3, 3 * i:3 * i + 3] = diag[i]
        if i > 0:
            A[3 * i:3 * i + 3, 3 * i - 3:3 * i] = lower[i]
        if i < n - 1:
            A[3 * i:3 * i + 3, 3 * i + 3:3 * i + 6] = upper[i]
    return A


backends = [pytest.param(_fallback, id="python")]
if compiled is not None:
    backends.append(pytest.param(compiled, id="compiled"))


@pytest.mark.parametrize("mod", backends)
@pytest.mark.parametrize("n", [1, 2, 7, 64])
def test_block_solve_matches_dense(mod, n):
    rng = np.random.default_rng(n)
    blocks = _random_blocks(rng, n)
    rhs = rng.standard_normal((n, 3))
    x = mod.btd_solve(mod.btd_factor(*blocks), rhs)
    ref = np.linalg.solve(_dense(*blocks), rhs.reshape(-1)).reshape(n, 3)
    assert np.max(np.abs(x - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


@pytest.mark.parametrize("mod", backends)
def test_singular_block_raises(mod):
    n = 4
    z = np.zeros((n, 3, 3))
    diag = np.tile(np.eye(3), (n, 1, 1))
    diag[2] = 0.0
    with pytest.raises(np.linalg.LinAlgError):
        mod.btd_factor(z, diag, z)


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
def test_backends_agree():
    rng = np.random.default_rng(11)
    blocks = _random_blocks(rng, 33, shift=4.0)
    rhs = rng.standard_normal((33, 3))
    a = compiled.btd_solve(compiled.btd_factor(*blocks), rhs)
    b = _fallback.btd_solve(_fallback.btd_factor(*blocks), rhs)
    assert np.max(np.abs(a - b)) <= 1e-12


def test_backend_label():
    assert kernels.BACKEND in ("compiled", "python")


def _operator(grid, rng):
    coef = rng.standard_normal((grid.n_nodes, 3, 3)) + 6 * np.eye(3)
    lap = np.array([[-0.1, 0.0, 0.0], [0.0, -0.1, 0.0], [0.0, 0.01, -0.1]])
    return BlockOperator(grid, coef, lap)


@pytest.mark.parametrize("grid", [build_grid(1, [1.0], [9]), build_grid(2, [1.0, 1.0], [5, 6])], ids=["1d", "2d"])
def test_operator_matvec_matches_sparse(grid):
    rng = np.random.default_rng(2)
    op = _operator(grid, rng)
    x = rng.standard_normal((grid.n_nodes, 3))
    assert np.allclose(op.matvec(x).reshape(-1), op.tocsr() @ x.reshape(-1), atol=1e-12)


@pytest.mark.parametrize("grid", [build_grid(1, [1.0], [9]), build_grid(2, [1.0, 1.0], [5, 6])], ids=["1d", "2d"])
def test_operator_weighted_adjoint_identity(grid):
    rng = np.random.default_rng(5)
    op = _operator(grid, rng)
    x = rng.standard_normal((grid.n_nodes, 3))
    y = rng.standard_normal((grid.n_nodes, 3))
    lhs = grid.integrate(np.sum(op.matvec(x) * y, axis=1))
    rhs = grid.integrate(np.sum(x * op.adjoint().matvec(y), axis=1))
    assert lhs == pytest.approx(rhs, abs=1e-12)


@pytest.mark.parametrize("grid", [build_grid(1, [1.0], [17]), build_grid(2, [1.0, 1.0], [7, 7])], ids=["1d", "2d"])
def test_operator_factor_solves(grid):
    rng = np.random.default_rng(9)
    op = _operator(grid, rng)
    x = rng.standard_normal((grid.n_nodes, 3))
    sol = op.factor().solve(op.matvec(x))
    assert np.max(np.abs(sol - x)) <= 1e-9


def test_singular_operator_reports_breakdown():
    grid = build_grid(1, [1.0], [5])
    coef = np.zeros((5, 3, 3))
    with pytest.raises(LinearSolverBreakdown):
        BlockOperator(grid, coef, np.zeros((3, 3))).factor()


def test_operator_shape_validation():
    grid = build_grid(1, [1.0], [5])
    with pytest.raises(ValueError):
        BlockOperator(grid, np.zeros((4, 3, 3)), np.zeros((3, 3)))
