"""Quadrature configuration and checked wrappers around scipy's QUADPACK."""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import LabError, QuadratureError

__all__ = ["QuadratureConfig", "quad", "cos_tail", "gauss_legendre", "fixed_gl"]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances shared by every deterministic integral in the package.

    ``tail_cutoff`` is the point beyond which infinite Fourier-type domains
    are handed to an asymptotic or weighted rule instead of plain subdivision.
    """

    abs_tol: float = 1e-12
    rel_tol: float = 1e-9
    max_subdivisions: int = 500
    tail_cutoff: float = 200.0

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise LabError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise LabError("max_subdivisions must be at least 1")
        if not self.tail_cutoff > 0:
            raise LabError("tail_cutoff must be positive")


DEFAULT = QuadratureConfig()


def quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    q: QuadratureConfig = DEFAULT,
    **kwargs,
) -> tuple[float, float]:
    """scipy.integrate.quad that raises QuadratureError instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                f,
                a,
                b,
                epsabs=q.abs_tol,
                epsrel=q.rel_tol,
                limit=q.max_subdivisions,
                **kwargs,
            )[:2]
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quad on [{a}, {b}] did not converge: {exc}") from exc
    return val, err


def cos_tail(power: float, omega: float, a: float, q: QuadratureConfig) -> float:
    """int_a^inf u^power cos(omega u) du for power < -1, a > 0."""
    omega = abs(omega)
    if omega == 0.0:
        return -(a ** (power + 1.0)) / (power + 1.0)
    # QAWF only honours an absolute tolerance; scale it to the integrand size
    scale = a**power * min(a, 1.0 / omega)
    local = QuadratureConfig(max(q.abs_tol, 0.01 * q.rel_tol * scale), q.rel_tol,
                             q.max_subdivisions, q.tail_cutoff)
    val, _ = quad(lambda u: u**power, a, np.inf, local, weight="cos", wvar=omega)
    return val


@functools.lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def fixed_gl(f: Callable[[np.ndarray], np.ndarray], a, b, n: int = 64) -> np.ndarray:
    """Vectorized fixed-order Gauss-Legendre rule.

    ``a`` and ``b`` may be arrays of equal shape; ``f`` receives an array whose
    last axis runs over the nodes.
    """
    x, w = gauss_legendre(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    nodes = a + (b - a) * x
    return np.sum(f(nodes) * w, axis=-1) * (b - a)[..., 0]
