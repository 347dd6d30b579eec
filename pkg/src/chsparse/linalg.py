"""Three-field block operators ``A = sum_ab E_ab (diag(c_ab) + l_ab * Lap)``.

Unknowns are node-interleaved: ``x[i] = (mu_i, phi_i, sigma_i)``. In 1D the
matrix is block-tridiagonal and goes to the kernels in :mod:`chsparse.kernels`;
in 2D it is assembled sparse and solved with Jacobi-preconditioned GMRES.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .grid import GridSpec

log = logging.getLogger(__name__)

KRYLOV_RTOL = 1e-12


class LinearSolverBreakdown(RuntimeError):
    pass


class BlockOperator:
    def __init__(self, grid: GridSpec, coef: np.ndarray, lap: np.ndarray):
        self.grid = grid
        self.coef = np.ascontiguousarray(coef, dtype=float)
        self.lap = np.asarray(lap, dtype=float)
        if self.coef.shape != (grid.n_nodes, 3, 3) or self.lap.shape != (3, 3):
            raise ValueError("block operator shapes do not match the grid")

    def adjoint(self) -> "BlockOperator":
        """Adjoint with respect to the quadrature-weighted pairing.

        The weighted Laplacian is symmetric, so this is a plain block transpose.
        """
        return BlockOperator(self.grid, self.coef.transpose(0, 2, 1), self.lap.T)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lx = self.grid.apply_laplacian(x.T).T
        return np.einsum("nab,nb->na", self.coef, x) + lx @ self.lap.T

    def tocsr(self) -> sp.csr_matrix:
        n = self.grid.n_nodes
        local = sp.bsr_matrix((self.coef, np.arange(n), np.arange(n + 1)), shape=(3 * n, 3 * n))
        return (sp.kron(self.grid.laplacian, self.lap) + local).tocsr()

    def tridiagonal_blocks(self):
        L = self.grid.laplacian
        d0 = L.diagonal(0)
        dm = L.diagonal(-1)
        dp = L.diagonal(1)
        n = self.grid.n_nodes
        diag = self.coef + d0[:, None, None] * self.lap
        lower = np.zeros((n, 3, 3))
        upper = np.zeros((n, 3, 3))
        lower[1:] = dm[:, None, None] * self.lap
        upper[:-1] = dp[:, None, None] * self.lap
        return lower, diag, upper

    def factor(self) -> "Factor":
        if self.grid.dim == 1:
            return _TridiagFactor(self)
        return _KrylovFactor(self)


class Factor:
    def solve(self, rhs: np.ndarray) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class _TridiagFactor(Factor):
    def __init__(self, op: BlockOperator):
        try:
            self._f = kernels.btd_factor(*op.tridiagonal_blocks())
        except np.linalg.LinAlgError as exc:
            raise LinearSolverBreakdown(str(exc)) from exc

    def solve(self, rhs):
        x = kernels.btd_solve(self._f, np.ascontiguousarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise LinearSolverBreakdown("non-finite solution in block-tridiagonal solve")
        return x


class _KrylovFactor(Factor):
    def __init__(self, op: BlockOperator):
        self.A = op.tocsr()
        d = self.A.diagonal()
        if np.any(d == 0):
            raise LinearSolverBreakdown("zero diagonal entry; Jacobi preconditioner undefined")
        inv_d = 1.0 / d
        self.M = spla.LinearOperator(self.A.shape, matvec=lambda v: inv_d * v)
        self._lu = None

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        b = rhs.reshape(-1)
        if not np.any(b):
            return np.zeros_like(rhs)
        x, info = spla.gmres(self.A, b, rtol=KRYLOV_RTOL, atol=0.0, restart=200,
                             maxiter=50, M=self.M)
        if info != 0:
            # Jacobi-GMRES stalls on strongly stiff steps; finish with a direct solve
            log.debug("GMRES did not reach rtol=%g (info=%d); using sparse LU", KRYLOV_RTOL, info)
            if self._lu is None:
                self._lu = spla.splu(self.A.tocsc())
            x = self._lu.solve(b)
        if not np.all(np.isfinite(x)):
            raise LinearSolverBreakdown("non-finite solution in Krylov solve")
        return x.reshape(rhs.shape)
