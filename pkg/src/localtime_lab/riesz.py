"""Riesz-type kernels: psi, f_h, g_h, the convolved kernel K and c_gamma.

Fourier transforms use the unitary convention

    F(f)(x) = (2 pi)^{-1/2} * int exp(i x xi) f(xi) dxi,

so that ||g_h||_2 = ||f_h||_2 by Plancherel.  With this convention

    g_h(x) = c * h^{-(5/2 - beta)} * int_{x-h}^{x+h} (h - |x - y|) |y|^{-beta} dy,

and the constant c is recovered numerically by calibrating the closed form
against the oscillatory Fourier integral (its analytic value is exposed for
auditing as ``g_h_constant_analytic``).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import LabError
from .gaussian import heat_kernel_deriv
from .quadrature import DEFAULT, QuadratureConfig, cos_tail, quad

__all__ = [
    "RieszSpec",
    "GhCalibration",
    "psi",
    "f_h_fourier",
    "g_h_fourier",
    "g_h_eval",
    "g_h_calibration",
    "g_h_constant_analytic",
    "g_h_l2_norm",
    "g_h_l2_norm_spatial",
    "g_h_heat_pairing",
    "riesz_K",
    "riesz_K_convolution",
    "riesz_self_convolution",
    "riesz_constant_c_gamma",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class RieszSpec:
    """Riesz exponent ``beta`` in (1/2, 1], shift ``h`` and optional ``gamma``."""

    beta: float
    h: float
    gamma: float | None = None

    def __post_init__(self) -> None:
        if not 0.5 < self.beta <= 1.0:
            raise LabError(f"beta must lie in (1/2, 1], got {self.beta}")
        if not self.h > 0:
            raise LabError(f"shift h must be positive, got {self.h}")
        if self.gamma is not None:
            if not 0.75 < self.gamma < 1.0:
                raise LabError(f"gamma must lie in (3/4, 1), got {self.gamma}")
            if abs(self.beta - (2.0 * self.gamma - 1.0)) > 1e-12:
                raise LabError("beta must equal 2*gamma - 1")

    @classmethod
    def from_gamma(cls, gamma: float, h: float) -> "RieszSpec":
        return cls(beta=2.0 * gamma - 1.0, h=h, gamma=gamma)

    @property
    def h_power(self) -> float:
        return 2.5 - self.beta


def psi(xi):
    """psi(xi) = sin^2(xi / 2)."""
    return np.sin(0.5 * np.asarray(xi, dtype=float)) ** 2


def f_h_fourier(spec: RieszSpec, xi: float) -> float:
    """f_h(xi) = h^{-(5/2-beta)} psi(h xi) / |xi|^{3-beta}."""
    if xi == 0:
        raise LabError("f_h has a pole at xi = 0")
    return float(spec.h ** (-spec.h_power) * psi(spec.h * xi) / abs(xi) ** (3.0 - spec.beta))


# ---------------------------------------------------------------------------
# Fourier route.  Substituting xi = u/h gives g_h(x) = h^{-1/2} G(x/h) with
#   G(y) = (2/pi)^{1/2} int_0^inf cos(y u) psi(u) u^{beta-3} du.


def _G(beta: float, y: float, q: QuadratureConfig) -> float:
    y = abs(y)
    u0 = min(1.0, 1.0 / (1.0 + y))

    def near(u):
        # psi(u)/u^2 is smooth; the u^{beta-1} factor goes into the weight
        s = math.sin(0.5 * u) / u if u > 0 else 0.5
        return math.cos(y * u) * s * s

    head, _ = quad(near, 0.0, u0, q, weight="alg", wvar=(beta - 1.0, 0.0))
    p = beta - 3.0
    tail = 0.5 * cos_tail(p, y, u0, q)
    tail -= 0.25 * cos_tail(p, y + 1.0, u0, q)
    tail -= 0.25 * cos_tail(p, y - 1.0, u0, q)
    return math.sqrt(2.0 / math.pi) * (head + tail)


def g_h_fourier(spec: RieszSpec, x: float, q: QuadratureConfig = DEFAULT) -> float:
    """g_h(x) as the (unitary) Fourier transform of f_h, by oscillatory quadrature."""
    return spec.h**-0.5 * _G(spec.beta, x / spec.h, q)


# ---------------------------------------------------------------------------
# Closed form.  The triangle convolution int (h - |x-y|)_+ |y|^{-beta} dy is the
# second difference of F2(y) = |y|^{2-beta} / ((1-beta)(2-beta)).


def _triangle_riesz(beta: float, x: np.ndarray, h: float) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=float))
    a = 2.0 - beta
    norm = (1.0 - beta) * a
    out = np.empty_like(x)
    far = x > 2.0 * h
    xn = x[~far]
    out[~far] = (np.abs(xn + h) ** a - 2.0 * xn**a + np.abs(xn - h) ** a) / norm
    if np.any(far):
        # binomial series avoids the cancellation in the second difference
        xf = x[far]
        u2 = (h / xf) ** 2
        total = np.zeros_like(xf)
        coef = 1.0
        term_pow = np.ones_like(xf)
        for k in range(1, 40):
            coef *= (a - 2 * k + 2) * (a - 2 * k + 1) / ((2 * k - 1) * (2 * k))
            term_pow = term_pow * u2
            total += 2.0 * coef * term_pow
        out[far] = xf**a * total / norm
    return out


def g_h_constant_analytic(beta: float) -> float:
    """c = (2 pi)^{1/2} / (8 Gamma(1-beta) sin(pi beta / 2)), for beta < 1."""
    if not 0.0 < beta < 1.0:
        raise LabError("closed-form constant requires 0 < beta < 1")
    return _SQRT_2PI / (8.0 * special.gamma(1.0 - beta) * math.sin(0.5 * math.pi * beta))


@dataclass(frozen=True)
class GhCalibration:
    beta: float
    constant: float
    analytic: float
    reference_points: tuple[float, ...]
    max_rel_residual: float


_REFERENCE_Y = (0.1, 0.35, 0.8, 1.3, 2.0, 3.5, 6.0, 11.0)


@functools.lru_cache(maxsize=None)
def _calibrate(beta: float, q: QuadratureConfig) -> GhCalibration:
    ys = np.array(_REFERENCE_Y)
    fourier = np.array([_G(beta, y, q) for y in ys])
    closed = _triangle_riesz(beta, ys, 1.0)
    c = float(fourier @ closed / (closed @ closed))
    resid = np.max(np.abs(c * closed - fourier) / np.abs(fourier))
    return GhCalibration(beta, c, g_h_constant_analytic(beta), tuple(ys), float(resid))


def g_h_calibration(beta: float, q: QuadratureConfig = DEFAULT) -> GhCalibration:
    """Least-squares constant of the closed form against the Fourier route.

    Calibrated once per (beta, q) at h = 1; the constant is h-free because
    both sides scale as h^{-1/2} G(x/h).
    """
    if not 0.5 < beta < 1.0:
        raise LabError("closed form is only available for 1/2 < beta < 1")
    return _calibrate(float(beta), q)


def g_h_eval(spec: RieszSpec, x, q: QuadratureConfig = DEFAULT):
    """g_h(x) from the closed form with the calibrated constant.

    At beta = 1 the Riesz factor degenerates and g_h is an explicit triangle.
    """
    x_arr = np.asarray(x, dtype=float)
    h = spec.h
    if spec.beta == 1.0:
        out = h**-1.5 * _SQRT_2PI / 4.0 * np.clip(h - np.abs(x_arr), 0.0, None)
    else:
        c = g_h_calibration(spec.beta, q).constant
        out = c * h ** (-spec.h_power) * _triangle_riesz(spec.beta, np.atleast_1d(x_arr), h)
        out = out.reshape(x_arr.shape)
    return out if x_arr.ndim else float(out)


def g_h_l2_norm(spec: RieszSpec, q: QuadratureConfig = DEFAULT) -> float:
    """int g_h^2 = int psi^2(xi) |xi|^{2 beta - 6} dxi (no h dependence)."""
    b = spec.beta
    p = 2.0 * b - 6.0

    def near(u):
        s = math.sin(0.5 * u) / u if u > 0 else 0.5
        return s**4

    head, _ = quad(near, 0.0, 1.0, q, weight="alg", wvar=(2.0 * b - 2.0, 0.0))
    cut = max(q.tail_cutoff, 2.0)
    breaks = list(np.arange(2.0 * math.pi, cut, 2.0 * math.pi))
    body, _ = quad(lambda u: math.sin(0.5 * u) ** 4 * u**p, 1.0, cut, q,
                   points=breaks or None)
    # sin^4(u/2) = (3 - 4 cos u + cos 2u) / 8
    tail = 3.0 / 8.0 * cut ** (p + 1.0) / -(p + 1.0)
    tail += -0.5 * cos_tail(p, 1.0, cut, q) + 0.125 * cos_tail(p, 2.0, cut, q)
    return 2.0 * (head + body + tail)


def g_h_l2_norm_spatial(spec: RieszSpec, q: QuadratureConfig = DEFAULT) -> float:
    """int g_h(x)^2 dx integrated in x from the calibrated closed form.

    Uses g_h(x) = h^{-1/2} G(x/h), so the integral is taken at h = 1.
    """
    unit = RieszSpec(spec.beta, 1.0)
    g2 = lambda y: g_h_eval(unit, y, q) ** 2
    body = 0.0
    edges = [0.0, 1.0, 2.0, 8.0, 64.0, 512.0]
    for a, b in zip(edges[:-1], edges[1:]):
        body += quad(g2, a, b, q)[0]
    # tail: G(y) ~ c y^{-beta} (1 + k y^{-2} + ...) beyond y = 512
    b = spec.beta
    c = g_h_calibration(b, q).constant if b < 1.0 else 0.0
    k = b * (b + 1.0) / 12.0
    y0 = edges[-1]
    tail = c**2 * (y0 ** (1 - 2 * b) / (2 * b - 1) + 2 * k * y0 ** (-1 - 2 * b) / (2 * b + 1))
    return 2.0 * (body + tail)


def g_h_heat_pairing(spec: RieszSpec, t: float, q: QuadratureConfig = DEFAULT) -> float:
    """int g_h(x) p_t(x) dx = (2/pi)^{1/2} int_0^inf f_h(xi) exp(-t xi^2/2) dxi."""
    if not t > 0:
        raise LabError(f"t must be positive, got {t}")
    b, h = spec.beta, spec.h
    xi_max = math.sqrt(120.0 / t)
    xi1 = min(1.0 / h, xi_max)

    def near(xi):
        s = math.sin(0.5 * h * xi) / xi if xi > 0 else 0.5 * h
        return s * s * math.exp(-0.5 * t * xi * xi)

    total, _ = quad(near, 0.0, xi1, q, weight="alg", wvar=(b - 1.0, 0.0))
    if xi1 < xi_max:
        breaks = list(np.arange(xi1 + math.pi / h, xi_max, math.pi / h))[:200]
        body, _ = quad(
            lambda xi: psi(h * xi) * xi ** (b - 3.0) * math.exp(-0.5 * t * xi * xi),
            xi1, xi_max, q, points=breaks or None,
        )
        total += body
    return math.sqrt(2.0 / math.pi) * h ** (-spec.h_power) * total


# ---------------------------------------------------------------------------


def _riesz_fourier_constant(beta: float) -> float:
    """C_beta with int |y|^{-beta} exp(-i xi y) dy = C_beta |xi|^{beta-1}."""
    return 2.0 * special.gamma(1.0 - beta) * math.sin(0.5 * math.pi * beta)


def _check_beta_open(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise LabError(f"beta must lie in (0, 1) for the Riesz kernel, got {beta}")


def riesz_K(beta: float, t: float, x: float, q: QuadratureConfig = DEFAULT) -> float:
    """K_t(x) = (f_beta * p_t')(x) through its Fourier representation.

    K_t(x) = -(C_beta / pi) int_0^inf sin(xi x) xi^beta exp(-t xi^2 / 2) dxi.
    """
    _check_beta_open(beta)
    if not t > 0:
        raise LabError(f"t must be positive, got {t}")
    if x == 0:
        return 0.0
    xi_max = math.sqrt(120.0 / t)
    step = math.pi / abs(x)
    breaks = list(np.arange(step, xi_max, step))[:400]
    val, _ = quad(
        lambda xi: math.sin(xi * x) * xi**beta * math.exp(-0.5 * t * xi * xi),
        0.0, xi_max, q, points=breaks or None,
    )
    return -_riesz_fourier_constant(beta) / math.pi * val


def riesz_K_convolution(beta: float, t: float, x: float, q: QuadratureConfig = DEFAULT) -> float:
    """Direct spatial convolution int |y|^{-beta} p_t'(x - y) dy."""
    _check_beta_open(beta)
    d1 = lambda y: heat_kernel_deriv(1, t, x - y)
    reach = abs(x) + 40.0 * math.sqrt(t)
    total = 0.0
    for sign in (1.0, -1.0):
        # singular weight |y|^{-beta} sits exactly on the endpoint y = 0
        total += quad(lambda u: d1(sign * u), 0.0, reach, q,
                      weight="alg", wvar=(-beta, 0.0))[0]
    return total


def riesz_self_convolution(gamma: float, x: float, q: QuadratureConfig = DEFAULT) -> float:
    """(f_gamma * f_gamma)(x) = int |y|^{-gamma} |x - y|^{-gamma} dy for x > 0."""
    if not 0.5 < gamma < 1.0:
        raise LabError(f"gamma must lie in (1/2, 1), got {gamma}")
    if not x > 0:
        raise LabError("x must be positive")
    g = gamma
    mid, _ = quad(lambda y: 1.0, 0.0, x, q, weight="alg", wvar=(-g, -g))
    # outer pieces, mapped to (0, 1] by y = x/s, with endpoint weights
    right, _ = quad(lambda s: x ** (1.0 - 2.0 * g), 0.0, 1.0, q,
                    weight="alg", wvar=(2.0 * g - 2.0, -g))
    return mid + 2.0 * right


def riesz_constant_c_gamma(gamma: float, q: QuadratureConfig = DEFAULT) -> float:
    """c_gamma = int |y|^{-gamma} |1 - y|^{-gamma} dy, so f_g * f_g = c_g f_{2g-1}."""
    if not 0.75 < gamma < 1.0:
        raise LabError(f"gamma must lie in (3/4, 1), got {gamma}")
    return riesz_self_convolution(gamma, 1.0, q)
