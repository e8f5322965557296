"""Limit variances of the chaos projections in one and two dimensions.

One dimension.  For the 2m-th chaos component X of the renormalized modulus
Hamiltonian, the L^2 isometry gives

    E[X_t X_s] = 256/(2m)! * < (f_h + g_{h,t}) 1_{[0,t]^2m}, (f_h + g_{h,s}) 1_{[0,s]^2m} >,

and the dominant f_h-part equals A_h(s) = (2m)! (2m-2)! h^4 a(h) / pi with

    a(h) = int_{h/sqrt(s)}^inf u^{-3} (s - h^2/u^2) I_u^2 du,
    I_u  = int_0^u exp(-z^2/2) H_{2m-2}(z) (1 - z/u) dz.

Since a(h) ~ (s/4) H_{2m-2}(0)^2 ln(1/h), chaining the constants gives

    sigma_m^2 = 256/pi * (2m-2)! / (2^{2m} ((m-1)!)^2),   sigma_1^2 = 64/pi.

Two dimensions.  sigma_m^2 is proportional to L^phi_{2m} / (2m-2)!, where

    L^phi_{2m,e} = int int <xi,eta>^{2m} |xi|^-4 |eta|^-4 phi(<xi,e>, <eta,e>)
                   exp(-(|xi|^2 + |eta|^2)/2) dxi deta,
    phi(x, y)    = int_0^inf u^{-3} (1 - cos ux)(1 - cos uy) du.

Expanding <xi,eta>^{2m} binomially and integrating phi's u-variable last turns
the four-dimensional integral into int u^{-3} sum_k C(2m,k) M_k(u)^2 du, where
M_k(u) = int_0^{2 pi} cos^k(theta) sin^{2m-k}(theta) R(u cos(theta - theta_e)) dtheta
and R is the exact radial factor from :func:`chaos.radial_factor_2d`.
The universal constant in front of the 2-d variance is not fixed; values are
reported with that constant set to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import special

from .chaos import f_h_kernel, g_h_kernel, minmax_inner_product, radial_factor_2d, MinMaxKernel
from .errors import LabError
from .gaussian import hermite, hermite_at_zero
from .quadrature import DEFAULT, QuadratureConfig, cos_tail, gauss_legendre, quad

__all__ = [
    "VarianceLimit",
    "AffineFit",
    "ISOMETRY_CONSTANT",
    "SIGMA_1D_CONSTANT",
    "a_of_h",
    "a_limit_slope",
    "A_h",
    "affine_fit_a",
    "sigma_sq_1d",
    "sigma_sq_1d_from_slope",
    "partial_sums_1d",
    "varphi_2d",
    "L_2m_phi",
    "sigma_sq_2d",
    "partial_sums_2d",
    "covariance_1d",
    "increment_variance_bound",
]

ISOMETRY_CONSTANT = 256.0
SIGMA_1D_CONSTANT = 256.0 / math.pi


@dataclass(frozen=True)
class VarianceLimit:
    """A limit variance coefficient together with how it was normalized."""

    m: int
    sigma_sq: float
    normalization: str
    constant: float
    raw_limit: float
    error: float = 0.0
    note: str = ""

    def __post_init__(self) -> None:
        if not self.sigma_sq > 0:
            raise LabError(f"sigma_sq must be positive, got {self.sigma_sq}")


# ---------------------------------------------------------------------------
# One dimension

_Z_MAX = 40.0


def _inner_I(m: int, u: np.ndarray) -> np.ndarray:
    """I_u for an array of u (Gauss-Legendre on [0, min(u, 40)])."""
    x, w = gauss_legendre(128)
    top = np.minimum(u, _Z_MAX)[:, None]
    z = top * x
    g = np.exp(-0.5 * z * z) * hermite(2 * m - 2, z)
    return np.sum(g * (1.0 - z / u[:, None]) * w, axis=1) * top[:, 0]


def _tail_moments(m: int) -> tuple[float, float]:
    x, w = gauss_legendre(256)
    z = _Z_MAX * x
    g = np.exp(-0.5 * z * z) * hermite(2 * m - 2, z) * w * _Z_MAX
    return float(np.sum(g)), float(np.sum(g * z))


def a_of_h(m: int, h: float, s: float = 1.0, q: QuadratureConfig = DEFAULT) -> float:
    """a(h) by quadrature in log u; beyond u = 40 the inner integral is exact in 1/u."""
    if m < 1:
        raise LabError("m must be at least 1")
    if not 0 < s <= 1:
        raise LabError("s must lie in (0, 1]")
    if not 0 < h < math.sqrt(s):
        raise LabError(f"need 0 < h < sqrt(s), got h={h}, s={s}")
    h2 = h * h

    def f(v: float) -> float:
        u = math.exp(v)
        iu = _inner_I(m, np.array([u]))[0]
        return (s - h2 / (u * u)) * iu * iu / (u * u)

    lo, hi = math.log(h / math.sqrt(s)), math.log(_Z_MAX)
    pts = [0.0] if lo < 0.0 else None
    body, _ = quad(f, lo, hi, q, points=pts)
    c0, c1 = _tail_moments(m)
    U = _Z_MAX
    # int_U^inf u^-3 (s - h^2 u^-2) (c0 - c1/u)^2 du, term by term
    terms = [
        (s * c0 * c0, 3), (-2 * s * c0 * c1, 4), (s * c1 * c1, 5),
        (-h2 * c0 * c0, 5), (2 * h2 * c0 * c1, 6), (-h2 * c1 * c1, 7),
    ]
    tail = sum(a * U ** (1 - p) / (p - 1) for a, p in terms)
    return body + tail


def a_limit_slope(m: int, s: float = 1.0) -> float:
    """lim a(h)/ln(1/h) = (s/4) H_{2m-2}(0)^2."""
    return 0.25 * s * hermite_at_zero(2 * m - 2) ** 2


def A_h(m: int, h: float, s: float = 1.0, q: QuadratureConfig = DEFAULT) -> float:
    """<f_h 1_{[0,s]^2m}, f_h 1_{[0,s]^2m}> = (2m)! (2m-2)! h^4 a(h) / pi."""
    fac = math.factorial(2 * m) * math.factorial(2 * m - 2)
    return fac * h**4 * a_of_h(m, h, s, q) / math.pi


@dataclass(frozen=True)
class AffineFit:
    """a(h) ~ slope * ln(1/h) + intercept over a grid of h."""

    m: int
    s: float
    slope: float
    intercept: float
    r_squared: float
    target_slope: float
    hs: tuple[float, ...] = field(default=())
    values: tuple[float, ...] = field(default=())

    @property
    def rel_dev(self) -> float:
        return abs(self.slope / self.target_slope - 1.0)


def affine_fit_a(
    m: int,
    s: float = 1.0,
    hs: Sequence[float] = (1e-2, 10**-2.5, 1e-3, 10**-3.5, 1e-4, 10**-4.5, 1e-5),
    q: QuadratureConfig = DEFAULT,
) -> AffineFit:
    hs = tuple(float(h) for h in hs)
    if len(hs) < 2:
        raise LabError("need at least two h values")
    x = np.log(1.0 / np.array(hs))
    y = np.array([a_of_h(m, h, s, q) for h in hs])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return AffineFit(m, s, float(slope), float(intercept), r2, a_limit_slope(m, s), hs,
                     tuple(y.tolist()))


def sigma_sq_1d(m: int) -> VarianceLimit:
    """sigma_m^2 = (256/pi) (2m-2)! / (2^{2m} ((m-1)!)^2), normalization h^4 ln(1/h)."""
    if m < 1:
        raise LabError("m must be at least 1")
    ratio = math.factorial(2 * m - 2) / (4.0**m * math.factorial(m - 1) ** 2)
    raw = math.factorial(2 * m) * math.factorial(2 * m - 2) / math.pi * a_limit_slope(m)
    return VarianceLimit(
        m, SIGMA_1D_CONSTANT * ratio, "h^4 ln(1/h)", SIGMA_1D_CONSTANT, raw,
        note="constant 256/pi derived by chaining the isometry and a(h) limits",
    )


def sigma_sq_1d_from_slope(m: int, slope: float, s: float = 1.0) -> float:
    """sigma_m^2 implied by a fitted slope of a(h) against ln(1/h) at horizon s."""
    return ISOMETRY_CONSTANT * math.factorial(2 * m - 2) * slope / (math.pi * s)


def partial_sums_1d(M: int) -> np.ndarray:
    """S(1..M) for the 1-d series, using the exact ratio (2m-1)/(2m)."""
    if M < 1:
        raise LabError("M must be at least 1")
    terms = np.empty(M)
    terms[0] = sigma_sq_1d(1).sigma_sq
    for k in range(1, M):
        terms[k] = terms[k - 1] * (2 * k - 1) / (2 * k)
    return np.cumsum(terms)


def covariance_1d(m: int, h: float, s: float, t: float, q: QuadratureConfig = DEFAULT) -> float:
    """E[X_t X_s] for s <= t from the (min, max) pairing of f_h + g_{h,.}."""
    def total(tt: float) -> MinMaxKernel:
        f, g = f_h_kernel(m, h), g_h_kernel(m, h, tt)
        return MinMaxKernel(lambda a, b: f(a, b) + g(a, b), m, h, f"f+g(t={tt})")

    pair = minmax_inner_product(total(t), total(s), m, s, t, q)
    return ISOMETRY_CONSTANT / math.factorial(2 * m) * pair


def increment_variance_bound(
    m: int, h: float, s: float, t: float, q: QuadratureConfig = DEFAULT
) -> float:
    """E|X_t - X_s|^2 / (h^4 ln(1/h)) by polarization of the covariance."""
    if not 0 <= s <= t <= 1:
        raise LabError(f"need 0 <= s <= t <= 1, got s={s}, t={t}")
    if not 0 < h < 1:
        raise LabError("h must lie in (0, 1)")
    if s == t:
        return 0.0
    qtt = covariance_1d(m, h, t, t, q)
    if s == 0:
        total = qtt
    else:
        total = qtt - 2.0 * covariance_1d(m, h, s, t, q) + covariance_1d(m, h, s, s, q)
    return total / (h**4 * math.log(1.0 / h))


# ---------------------------------------------------------------------------
# Two dimensions


def varphi_2d(x: float, y: float, q: QuadratureConfig = DEFAULT) -> float:
    """phi(x, y) = int_0^inf u^{-3} (1 - cos ux)(1 - cos uy) du."""
    x, y = abs(float(x)), abs(float(y))
    if x == 0.0 or y == 0.0:
        return 0.0
    w = max(x, y)
    U = q.tail_cutoff / w

    def f(u: float) -> float:
        if u == 0.0:
            return 0.0
        return 4.0 * math.sin(0.5 * u * x) ** 2 * math.sin(0.5 * u * y) ** 2 / u**3

    step = math.pi / w
    pts = list(np.arange(step, U, step))[:400] or None
    body, _ = quad(f, 0.0, U, q, points=pts)
    # (1-cos a)(1-cos b) = 1 - cos a - cos b + cos(a+b)/2 + cos(a-b)/2
    tail = 0.5 / U**2
    for coef, om in ((-1.0, x), (-1.0, y), (0.5, x + y), (0.5, x - y)):
        tail += coef * cos_tail(-3.0, om, U, q)
    return body + tail


def _angular_mesh(u: float, theta_e: float, mesh: str) -> tuple[np.ndarray, np.ndarray]:
    if mesh == "uniform":
        N = 1 << max(8, math.ceil(math.log2(max(64.0 * u, 1.0))))
        return 2.0 * math.pi * np.arange(N) / N, np.full(N, 2.0 * math.pi / N)
    if mesh != "graded":
        raise LabError(f"unknown angular mesh {mesh!r}")
    # geometric grading toward the zeros of cos(theta - theta_e)
    K = max(1, math.ceil(math.log2(25.0 * math.pi * max(u, 1.0))))
    d = 0.5 * math.pi * 2.0 ** -np.arange(K + 1)
    xg, wg = gauss_legendre(24)
    nodes, weights = [], []
    for zero in (theta_e + 0.5 * math.pi, theta_e + 1.5 * math.pi):
        edges = [(zero - d[-1], zero + d[-1])]
        for k in range(K):
            edges += [(zero + d[k + 1], zero + d[k]), (zero - d[k], zero - d[k + 1])]
        for a, b in edges:
            nodes.append(a + (b - a) * xg)
            weights.append((b - a) * wg)
    return np.concatenate(nodes), np.concatenate(weights)


def _moment_sum(m: int, u: float, theta_e: float, mesh: str) -> float:
    th, w = _angular_mesh(u, theta_e, mesh)
    rad = radial_factor_2d(m, u * np.cos(th - theta_e), 1.0) * w
    c, s = np.cos(th), np.sin(th)
    n = 2 * m
    total = 0.0
    for k in range(n + 1):
        mk = float(np.sum(c**k * s ** (n - k) * rad))
        total += special.comb(n, k, exact=False) * mk * mk
    return total


def L_2m_phi(
    m: int,
    e: Sequence[float] = (1.0, 0.0),
    phi_cutoff: float | None = None,
    q: QuadratureConfig = DEFAULT,
    mesh: str = "graded",
    u_max: float = 2000.0,
) -> float:
    """L^phi_{2m,e}; with ``phi_cutoff`` the u-integral of phi starts there instead of 0."""
    if m < 1:
        raise LabError("m must be at least 1")
    ev = np.asarray(e, dtype=float)
    if ev.shape != (2,) or abs(np.hypot(*ev) - 1.0) > 1e-12:
        raise LabError("e must be a unit 2-vector")
    theta_e = math.atan2(ev[1], ev[0])
    u_lo = 1e-4 if phi_cutoff is None else float(phi_cutoff)
    if not 0 < u_lo < u_max:
        raise LabError("phi_cutoff must lie in (0, u_max)")

    f = lambda v: math.exp(-2.0 * v) * _moment_sum(m, math.exp(v), theta_e, mesh)
    lo, hi = math.log(u_lo), math.log(u_max)
    pts = [x for x in (0.0, math.log(10.0)) if lo < x < hi] or None
    body, _ = quad(f, lo, hi, q, points=pts)
    # the moment sum is ~ u^4 near 0 and nearly constant at u_max
    head = 0.0
    if phi_cutoff is None:
        head = _moment_sum(m, u_lo, theta_e, mesh) / (2.0 * u_lo**2)
    tail = _moment_sum(m, u_max, theta_e, mesh) / (2.0 * u_max**2)
    return head + body + tail


def sigma_sq_2d(m: int, q: QuadratureConfig = DEFAULT) -> VarianceLimit:
    """2 L^phi_{2m} / (2m-2)!, i.e. the 2-d variance with the universal constant set to 1."""
    L = L_2m_phi(m, q=q)
    return VarianceLimit(
        m, 2.0 * L / math.factorial(2 * m - 2), "|h|^2", 1.0, L,
        error=max(q.abs_tol, q.rel_tol * abs(L)),
        note="up to the universal constant of the 2-d limit",
    )


def partial_sums_2d(M: int, q: QuadratureConfig = DEFAULT) -> np.ndarray:
    if M < 1:
        raise LabError("M must be at least 1")
    return np.cumsum([sigma_sq_2d(m, q).sigma_sq for m in range(1, M + 1)])
