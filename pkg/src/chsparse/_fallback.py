"""Pure-Python counterparts of the compiled kernels in ``_kernels.pyx``.

Same signatures and results. The node-interleaved matrix is packed into LAPACK
band storage and factored once with ``dgbtrf``; ``btd_solve`` calls ``dgbtrs``.
"""

import numpy as np
from scipy.linalg import lapack

_BAND = 5  # 3x3 blocks on three block diagonals -> 5 sub/super diagonals


def _band_storage(lower, diag, upper):
    n = diag.shape[0]
    m = 3 * n
    kl = ku = _BAND
    ab = np.zeros((2 * kl + ku + 1, m))
    a_idx, b_idx = np.meshgrid(np.arange(3), np.arange(3), indexing="ij")
    nodes = np.arange(n)
    for offset, blocks in ((-1, lower), (0, diag), (1, upper)):
        i = nodes[(nodes + offset >= 0) & (nodes + offset < n)]
        rows = 3 * i[:, None, None] + a_idx
        cols = 3 * (i + offset)[:, None, None] + b_idx
        ab[kl + ku + rows - cols, cols] = blocks[i]
    return ab


def btd_factor(lower, diag, upper):
    ab = _band_storage(np.asarray(lower, float), np.asarray(diag, float), np.asarray(upper, float))
    lu, piv, info = lapack.dgbtrf(ab, _BAND, _BAND)
    if info > 0:
        raise np.linalg.LinAlgError("singular pivot in block-tridiagonal factorization")
    return lu, piv


def btd_solve(factor, rhs):
    lu, piv = factor
    rhs = np.asarray(rhs, dtype=float)
    x, info = lapack.dgbtrs(lu, _BAND, _BAND, rhs.reshape(-1), piv)
    if info != 0:
        raise ValueError(f"dgbtrs failed with info={info}")
    return x.reshape(rhs.shape)
