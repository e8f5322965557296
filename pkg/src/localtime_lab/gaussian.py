"""Heat kernel, its spatial derivatives, and Hermite polynomials.

Hermite polynomials use the normalization

    H_n(x) = (-1)^n / n! * exp(x^2/2) * d^n/dx^n exp(-x^2/2),

so that H_1(x) = x and H_2(x) = (x^2 - 1)/2.  They satisfy the three-term
recurrence (n+1) H_{n+1} = x H_n - H_{n-1}, which is what we evaluate.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike

from .errors import LabError

__all__ = [
    "hermite",
    "hermite_at_zero",
    "heat_kernel",
    "heat_kernel_deriv",
    "expected_heat_deriv",
]


def hermite(n: int, x: ArrayLike) -> np.ndarray | float:
    """Evaluate H_n at ``x`` with the stable three-term recurrence."""
    if n < 0:
        raise LabError(f"Hermite order must be non-negative, got {n}")
    x_arr = np.asarray(x, dtype=float)
    prev = np.ones_like(x_arr)
    if n == 0:
        return prev if x_arr.ndim else float(prev)
    cur = x_arr.copy()
    for k in range(1, n):
        prev, cur = cur, (x_arr * cur - prev) / (k + 1)
    return cur if x_arr.ndim else float(cur)


def hermite_at_zero(n: int) -> float:
    """Exact H_n(0): zero for odd n, (-1)^m / (2^m m!) for n = 2m."""
    if n < 0:
        raise LabError(f"Hermite order must be non-negative, got {n}")
    if n % 2:
        return 0.0
    m = n // 2
    return (-1) ** m / (2**m * math.factorial(m))


def _check_time(t) -> None:
    if not np.all(np.asarray(t) > 0):
        raise LabError(f"heat kernel time must be positive, got {t}")


def heat_kernel(t: float, y: ArrayLike) -> np.ndarray | float:
    """p_t(y) = (2 pi t)^{-1/2} exp(-y^2 / (2t)); broadcasts over t and y."""
    _check_time(t)
    t = np.asarray(t, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    out = np.exp(-0.5 * y_arr**2 / t) / np.sqrt(2.0 * math.pi * t)
    return out if out.ndim else float(out)


def heat_kernel_deriv(n: int, t: float, y: ArrayLike) -> np.ndarray | float:
    """n-th spatial derivative of p_t at y.

    Uses d^n/dy^n p_t(y) = n! t^{-n/2} (-1)^n p_t(y) H_n(y / sqrt(t)).
    Broadcasts over array-valued ``t`` and ``y``.
    """
    if n < 0:
        raise LabError(f"derivative order must be non-negative, got {n}")
    _check_time(t)
    t = np.asarray(t, dtype=float)
    y_arr = np.asarray(y, dtype=float)
    scale = math.factorial(n) * t ** (-0.5 * n) * (-1) ** n
    out = scale * heat_kernel(t, y_arr) * hermite(n, y_arr / np.sqrt(t))
    return out if np.ndim(out) else float(out)


def expected_heat_deriv(n: int, t: float, mean: float, var: float) -> float:
    """E[p_t^{(n)}(N)] for N ~ Normal(mean, var), equal to p_{t+var}^{(n)}(mean)."""
    _check_time(t)
    if var < 0:
        raise LabError(f"variance must be non-negative, got {var}")
    return float(heat_kernel_deriv(n, t + var, mean))
