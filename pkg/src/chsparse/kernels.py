"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``CHSPARSE_PURE=1`` in the environment to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"

if not os.environ.get("CHSPARSE_PURE"):
    try:
        from ._kernels import btd_factor, btd_solve

        BACKEND = "compiled"
    except ImportError:
        pass

if BACKEND == "python":
    btd_factor = _fallback.btd_factor
    btd_solve = _fallback.btd_solve

__all__ = ["BACKEND", "btd_factor", "btd_solve"]
