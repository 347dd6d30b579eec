"""Potentials, proliferation, and the physical/objective constants."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy


class SafeguardCounter:
    """Tally of logarithmic-potential evaluations that hit the safeguard band."""

    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)

    def __repr__(self):
        return f"SafeguardCounter(count={self.count})"


def f1_log(r, order: int = 0, sep_eps: float = 1e-6, counter: SafeguardCounter | None = None):
    """Logarithmic potential ``(1+r)ln(1+r) + (1-r)ln(1-r)`` and derivatives up to order 3.

    Derivative arguments are clamped to ``[-1+sep_eps, 1-sep_eps]``; a node is
    counted whenever its argument touches or leaves that band. The value itself
    (order 0) is finite on the closed interval and is only clamped outside it.
    """
    r = np.asarray(r, dtype=float)
    if order == 0:
        outside = np.abs(r) > 1.0
        if counter is not None and outside.any():
            counter.add(np.count_nonzero(outside))
        rc = np.clip(r, -1.0, 1.0)
        return xlogy(1.0 + rc, 1.0 + rc) + xlogy(1.0 - rc, 1.0 - rc)
    if order not in (1, 2, 3):
        raise ValueError(f"order must be 0..3, got {order}")
    bound = 1.0 - sep_eps
    hit = np.abs(r) >= bound
    if counter is not None and hit.any():
        counter.add(np.count_nonzero(hit))
    rc = np.clip(r, -bound, bound)
    if order == 1:
        return np.log1p(rc) - np.log1p(-rc)
    if order == 2:
        return 2.0 / (1.0 - rc * rc)
    return 1.0 / (1.0 - rc) ** 2 - 1.0 / (1.0 + rc) ** 2


def f2(r, order: int = 0, k: float = 1.0):
    """Concave quadratic part ``k(1 - r^2)``."""
    r = np.asarray(r, dtype=float)
    if order == 0:
        return k * (1.0 - r * r)
    if order == 1:
        return -2.0 * k * r
    if order == 2:
        return np.full_like(r, -2.0 * k)
    if order == 3:
        return np.zeros_like(r)
    raise ValueError(f"order must be 0..3, got {order}")


P_KINDS = ("constant", "logistic-smooth")


def proliferation(r, order: int, kind: str, coeffs: dict):
    """Proliferation ``P`` and its first two derivatives.

    ``constant``: ``P = p0``. ``logistic-smooth``: ``P = p0 (1 + tanh(r/scale)) / 2``.
    Both are nonnegative, bounded and smooth.
    """
    r = np.asarray(r, dtype=float)
    p0 = float(coeffs.get("p0", 0.0))
    if kind == "constant":
        if order == 0:
            return np.full_like(r, p0)
        if order in (1, 2):
            return np.zeros_like(r)
    elif kind == "logistic-smooth":
        s = float(coeffs.get("scale", 1.0))
        th = np.tanh(r / s)
        sech2 = 1.0 - th * th
        if order == 0:
            return 0.5 * p0 * (1.0 + th)
        if order == 1:
            return 0.5 * p0 * sech2 / s
        if order == 2:
            return -p0 * sech2 * th / s**2
    else:
        raise ValueError(f"unknown proliferation family {kind!r}; expected one of {P_KINDS}")
    raise ValueError(f"order must be 0..2, got {order}")


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    beta: float = 1.0
    chi: float = 0.1
    f2_k: float = 1.2
    p_kind: str = "constant"
    p_coeffs: dict = field(default_factory=lambda: {"p0": 0.0})
    sep_eps: float = 1e-6

    def __post_init__(self):
        for name in ("alpha", "beta", "chi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.sep_eps < 0.1:
            raise ValueError("sep_eps must lie in (0, 0.1)")
        if self.p_kind not in P_KINDS:
            raise ValueError(f"unknown proliferation family {self.p_kind!r}")
        if float(self.p_coeffs.get("p0", 0.0)) < 0:
            raise ValueError("proliferation p0 must be nonnegative")
        if self.p_kind == "logistic-smooth" and not float(self.p_coeffs.get("scale", 1.0)) > 0:
            raise ValueError("logistic-smooth scale must be positive")

    def dF(self, r, order: int, counter: SafeguardCounter | None = None):
        """Derivative of ``F = F1,log + F2`` of the given order (1..3)."""
        return f1_log(r, order, self.sep_eps, counter) + f2(r, order, self.f2_k)

    def P(self, r, order: int = 0):
        return proliferation(r, order, self.p_kind, self.p_coeffs)

    def p_bound(self) -> float:
        """Upper bound on |P|, |P'|, |P''| over the real line."""
        p0 = float(self.p_coeffs.get("p0", 0.0))
        if self.p_kind == "constant":
            return p0
        s = float(self.p_coeffs.get("scale", 1.0))
        # max sech^2 tanh = 2/(3 sqrt 3)
        return max(p0, 0.5 * p0 / s, p0 * 2.0 / (3.0 * np.sqrt(3.0)) / s**2)


@dataclass(frozen=True, eq=False)
class CostParams:
    """Objective constants, targets, control bounds and control weight.

    ``target_q`` has one slice per time level (Nt+1), ``h_field`` one per
    control slab (Nt); ``bounds = (lo1, hi1, lo2, hi2)``.
    """

    b1: float
    b2: float
    b3: float
    kappa: float
    target_q: np.ndarray
    target_omega: np.ndarray
    bounds: tuple[float, float, float, float]
    h_field: np.ndarray

    def __post_init__(self):
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("b1 and b2 must be nonnegative")
        if not self.b3 > 0:
            raise ValueError("b3 must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        lo1, hi1, lo2, hi2 = (float(b) for b in self.bounds)
        if not (lo1 < hi1 and lo2 < hi2):
            raise ValueError(f"need lower < upper control bounds, got {self.bounds}")
        object.__setattr__(self, "bounds", (lo1, hi1, lo2, hi2))
        for name in ("target_q", "target_omega", "h_field"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if np.any(self.h_field < 0):
            raise ValueError("h_field must be nonnegative")

    @property
    def straddles_zero(self) -> bool:
        lo1, hi1, lo2, hi2 = self.bounds
        return lo1 < 0 < hi1 and lo2 < 0 < hi2

    def box(self, component: int) -> tuple[float, float]:
        lo1, hi1, lo2, hi2 = self.bounds
        return (lo1, hi1) if component == 1 else (lo2, hi2)
