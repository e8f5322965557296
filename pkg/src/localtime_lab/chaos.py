"""Chaos-projection kernels in one and two dimensions.

One-dimensional building block (n = 2m):

    Phi_{h,2m}(t1, t2) = int_0^h p_{t2-t1}^{(2m-2)}(y) (h - y) dy.

The chaos kernels f_h and g_{h,t} depend on their 2m time arguments only
through (min, max), which lets every L^2 pairing collapse to a two-dimensional
integral and every contraction norm to at most eight ordered coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy import special

from .errors import LabError, QuadratureError
from .gaussian import heat_kernel, heat_kernel_deriv
from .parallel import map_blocks
from .quadrature import DEFAULT, QuadratureConfig, fixed_gl, gauss_legendre, quad

__all__ = [
    "ChaosSpec",
    "MinMaxKernel",
    "ContractionEstimate",
    "phi_1d",
    "phi_1d_closed",
    "kernel_f_h",
    "kernel_g_h_t",
    "f_h_kernel",
    "g_h_kernel",
    "zero_kernel",
    "minmax_inner_product",
    "contraction_ratio",
    "contraction_norm_direct",
    "phi_2d",
    "radial_factor_2d",
]


@dataclass(frozen=True)
class ChaosSpec:
    """Chaos order n = 2m, shift h (scalar or 2-vector) and horizon t."""

    m: int
    h: float | tuple[float, float]
    t: float = 1.0
    dim: int = 1

    def __post_init__(self) -> None:
        if self.m < 1:
            raise LabError(f"m must be at least 1, got {self.m}")
        if not 0.0 < self.t <= 1.0:
            raise LabError(f"t must lie in (0, 1], got {self.t}")
        if self.dim not in (1, 2):
            raise LabError("dim must be 1 or 2")
        if self.dim == 1:
            if not (np.isscalar(self.h) and self.h > 0):
                raise LabError("1-d shift must be a positive scalar")
        elif np.shape(self.h) != (2,) or not np.any(np.asarray(self.h) != 0):
            raise LabError("2-d shift must be a non-zero 2-vector")


# ---------------------------------------------------------------------------
# Phi_{h,2m}


def _check_tau(tau) -> None:
    if not np.all(np.asarray(tau) > 0):
        raise LabError("Phi_h needs t1 < t2; coincident times are rejected")


def phi_1d_closed(m: int, h: float, tau):
    """Vectorized Phi_{h,2m} as a function of tau = t2 - t1 > 0.

    Integration by parts gives p_tau^{(2m-4)}(h) - p_tau^{(2m-4)}(0) for
    m >= 2 and an erf expression for m = 1.  When h^2/tau is tiny the
    difference cancels, so a fixed Gauss-Legendre rule on the defining
    integral is used instead.
    """
    if m < 1:
        raise LabError("m must be at least 1")
    tau = np.asarray(tau, dtype=float)
    _check_tau(tau)
    flat = np.atleast_1d(tau).ravel()
    out = np.empty_like(flat)
    small = h * h / flat <= 1e-2
    if np.any(small):
        x, w = gauss_legendre(16)
        y = h * x
        vals = heat_kernel_deriv(2 * m - 2, flat[small][:, None], y[None, :])
        out[small] = h * np.sum(vals * (h - y) * w, axis=1)
    big = ~small
    if np.any(big):
        tb = flat[big]
        if m == 1:
            out[big] = 0.5 * h * special.erf(h / np.sqrt(2.0 * tb)) + np.sqrt(
                tb / (2.0 * math.pi)
            ) * np.expm1(-0.5 * h * h / tb)
        else:
            k = 2 * m - 4
            out[big] = heat_kernel_deriv(k, tb, h) - heat_kernel_deriv(k, tb, 0.0)
    out = out.reshape(np.shape(tau))
    return out if out.ndim else float(out)


def phi_1d(
    m: int,
    h: float,
    t1: float,
    t2: float,
    q: QuadratureConfig = DEFAULT,
    method: str = "quad",
) -> float:
    """Phi_{h,2m}(t1, t2) by adaptive quadrature (``method="quad"``) or closed form."""
    if m < 1:
        raise LabError("m must be at least 1")
    if not h > 0:
        raise LabError("h must be positive")
    if not t1 < t2 or t1 < 0:
        raise LabError(f"need 0 <= t1 < t2, got t1={t1}, t2={t2}")
    tau = t2 - t1
    if method == "closed":
        return phi_1d_closed(m, h, tau)
    if method != "quad":
        raise LabError(f"unknown method {method!r}")
    val, _ = quad(lambda y: heat_kernel_deriv(2 * m - 2, tau, y) * (h - y), 0.0, h, q)
    return val


def _min_max(spec: ChaosSpec, times: Sequence[float]) -> tuple[float, float]:
    ts = np.asarray(times, dtype=float)
    if ts.shape != (2 * spec.m,):
        raise LabError(f"expected {2 * spec.m} time arguments, got {ts.size}")
    if np.any(ts < 0) or np.any(ts > spec.t):
        raise LabError(f"times must lie in [0, {spec.t}]")
    return float(ts.min()), float(ts.max())


def kernel_f_h(spec: ChaosSpec, times: Sequence[float]) -> float:
    """f_h(t_1..t_2m) = Phi_h(min, max)."""
    lo, hi = _min_max(spec, times)
    if hi <= lo:
        raise LabError("f_h is undefined when all times coincide")
    return phi_1d_closed(spec.m, spec.h, hi - lo)


def kernel_g_h_t(spec: ChaosSpec, times: Sequence[float]) -> float:
    """g_{h,t}(t_1..t_2m) = -Phi_h(min, t) + Phi_h(0, t) - Phi_h(0, max)."""
    lo, hi = _min_max(spec, times)
    if lo >= spec.t or hi <= 0:
        raise LabError("g_{h,t} needs min < t and max > 0")
    phi = lambda tau: phi_1d_closed(spec.m, spec.h, tau)
    return -phi(spec.t - lo) + phi(spec.t) - phi(hi)


# ---------------------------------------------------------------------------
# Kernels depending on (min, max) and their L^2 pairings


@dataclass(frozen=True)
class MinMaxKernel:
    """A kernel k(t_min, t_max), vectorized in both arguments.

    ``stationary`` optionally gives k as a function of t_max - t_min alone,
    which lets pairings drop to a one-dimensional integral.
    """

    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    m: int
    h: float
    name: str = "custom"
    stationary: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, tmin, tmax):
        return self.func(np.asarray(tmin, dtype=float), np.asarray(tmax, dtype=float))


def f_h_kernel(m: int, h: float) -> MinMaxKernel:
    phi = lambda tau: phi_1d_closed(m, h, tau)
    return MinMaxKernel(lambda a, b: phi(b - a), m, h, "f_h", stationary=phi)


def g_h_kernel(m: int, h: float, t: float) -> MinMaxKernel:
    phi = lambda tau: phi_1d_closed(m, h, tau)
    base = phi_1d_closed(m, h, t)
    return MinMaxKernel(lambda a, b: -phi(t - a) + base - phi(b), m, h, f"g_h(t={t})")


def zero_kernel(m: int, h: float) -> MinMaxKernel:
    zero = lambda tau: np.zeros_like(np.asarray(tau, dtype=float))
    return MinMaxKernel(lambda a, b: np.zeros(np.broadcast(a, b).shape), m, h, "zero", zero)


def minmax_inner_product(
    k1: MinMaxKernel,
    k2: MinMaxKernel,
    m: int,
    s: float,
    t: float,
    q: QuadratureConfig = DEFAULT,
) -> float:
    """<k1 1_{[0,t]^2m}, k2 1_{[0,s]^2m}> for kernels of (min, max).

    The common support is [0, s]^2m, and integrating out the 2m - 2 interior
    points leaves (2m)!/(2m-2)! * int_{0<a<b<s} k1 k2 (b - a)^{2m-2} da db.
    """
    if not 0.0 < s <= t <= 1.0:
        raise LabError(f"need 0 < s <= t <= 1, got s={s}, t={t}")
    n = 2 * m
    coef = n * (n - 1)
    h = max(k1.h, k2.h)
    pts = [x for x in (h * h, 4 * h * h, 25 * h * h) if x < s] or None
    if k1.stationary is not None and k2.stationary is not None:
        f = lambda tau: (
            float(k1.stationary(tau) * k2.stationary(tau)) * tau ** (n - 2) * (s - tau)
        )
        val, _ = quad(f, 0.0, s, q, points=pts)
        return coef * val

    # general kernels: tensor Gauss-Legendre on panels graded towards the
    # places where Phi_h(.) has its h^2 transition (tau -> 0, a -> 0, a -> t)
    x, w = gauss_legendre(16)
    delta = 1e-3 * h * h

    def rule(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo, width = edges[:-1, None], np.diff(edges)[:, None]
        return (lo + width * x).ravel(), (width * w).ravel()

    def graded(L: float, both: bool) -> np.ndarray:
        half = 0.5 * L if both else L
        d = min(delta, 0.5 * half)
        k = max(int(math.ceil(3 * math.log10(half / d))), 1)
        left = np.concatenate([[0.0], np.geomspace(d, half, k + 1)])
        return np.concatenate([left, L - left[-2::-1]]) if both else left

    taus, wt = rule(graded(s, False))
    total = 0.0
    for tau, wtau in zip(taus, wt):
        a, wa = rule(graded(s - tau, True))
        vals = k1(a, a + tau) * k2(a, a + tau)
        total += wtau * tau ** (n - 2) * float(vals @ wa)
    return coef * total


# ---------------------------------------------------------------------------
# Contraction norms


class ContractionEstimate(NamedTuple):
    """Normalized ratio ||f_h (x)_r f_h||^2 / (h^8 ln^2(1/h)) with its MC error."""

    estimate: float
    stderr: float
    norm: float
    norm_stderr: float
    n_mc: int


def _ordered_block(u: np.ndarray, k: int, t: float):
    """Map uniforms to (min, max, weight) of a block of k points in [0, t].

    A single point is its own min and max.  For k >= 2 the interior points are
    integrated out: weight k(k-1)(b-a)^{k-2} times the pair volume t^2/2.
    """
    if k == 1:
        x = t * u[:, 0]
        return x, x, np.full(len(x), t)
    a = t * np.minimum(u[:, 0], u[:, 1])
    b = t * np.maximum(u[:, 0], u[:, 1])
    return a, b, k * (k - 1) * (b - a) ** (k - 2) * (0.5 * t * t)


def _moments(vals: np.ndarray) -> tuple[int, float, float]:
    return len(vals), float(np.sum(vals)), float(np.sum(vals * vals))


def _merge(parts) -> tuple[float, float, int]:
    n = sum(p[0] for p in parts)
    s1 = math.fsum(p[1] for p in parts)
    s2 = math.fsum(p[2] for p in parts)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / max(n - 1, 1)), n


def contraction_ratio(
    m: int,
    r: int,
    h: float,
    t: float = 1.0,
    n_mc: int = 1_000_000,
    seed: int = 0,
) -> ContractionEstimate:
    """Monte Carlo estimate of ||f_h (x)_r f_h||^2 / (h^8 ln^2(1/h)).

    Uses the reduced form over (sigma^k, tau^k), k = 1, 2, where sigma^k are
    (min, max) of the r contracted variables and tau^k those of the n - r free
    variables; the integrand is prod_{i,j} Phi_h(min(sigma^i, tau^j), max(...)).
    """
    n = 2 * m
    if not 1 <= r <= n - 1:
        raise LabError(f"contraction order r must lie in [1, {n - 1}], got {r}")
    if n_mc < 1:
        raise LabError("n_mc must be positive")
    if not 0 < h < 1:
        raise LabError("h must lie in (0, 1)")
    if not 0 < t <= 1:
        raise LabError("t must lie in (0, 1]")
    sizes = (r, r, n - r, n - r)
    phi = lambda tau: phi_1d_closed(m, h, tau)

    def block(rng: np.random.Generator, size: int):
        u = rng.random((size, 8))
        parts = [_ordered_block(u[:, 2 * j : 2 * j + 2], k, t) for j, k in enumerate(sizes)]
        weight = parts[0][2] * parts[1][2] * parts[2][2] * parts[3][2]
        val = weight
        for i in (0, 1):
            for j in (2, 3):
                lo = np.minimum(parts[i][0], parts[j][0])
                hi = np.maximum(parts[i][1], parts[j][1])
                val = val * phi(hi - lo)
        return _moments(val)

    mean, se, count = _merge(map_blocks(block, seed, n_mc))
    scale = h**8 * math.log(1.0 / h) ** 2
    return ContractionEstimate(mean / scale, se / scale, mean, se, count)


def contraction_norm_direct(
    m: int, r: int, h: float, t: float = 1.0, n_mc: int = 1_000_000, seed: int = 0
) -> tuple[float, float]:
    """Plain 2n-dimensional MC of ||f_h (x)_r f_h||^2, for cross-checking."""
    n = 2 * m
    if not 1 <= r <= n - 1:
        raise LabError(f"contraction order r must lie in [1, {n - 1}], got {r}")
    phi = lambda tau: phi_1d_closed(m, h, tau)

    def f(x: np.ndarray, y: np.ndarray) -> np.ndarray:
        z = np.concatenate([x, y], axis=1)
        return phi(z.max(axis=1) - z.min(axis=1))

    def block(rng: np.random.Generator, size: int):
        s, u = t * rng.random((size, n - r)), t * rng.random((size, n - r))
        a, b = t * rng.random((size, r)), t * rng.random((size, r))
        val = f(s, a) * f(u, a) * f(s, b) * f(u, b) * t ** (2 * n)
        return _moments(val)

    mean, se, _ = _merge(map_blocks(block, seed, n_mc))
    return mean, se


# ---------------------------------------------------------------------------
# Two-dimensional kernels Phi_i


def _dawson_integral(w: np.ndarray) -> np.ndarray:
    """int_0^w D(v) dv for w >= 0 (D is Dawson's function)."""
    w = np.asarray(w, dtype=float)
    head = fixed_gl(special.dawsn, np.zeros_like(w), np.minimum(w, 1.0), 32)
    far = w > 1.0
    if np.any(far):
        # beyond 1, D(v) ~ 1/(2v) is smooth in log v
        lw = np.log(w[far])
        g = lambda s: special.dawsn(np.exp(s)) * np.exp(s)
        head[far] += fixed_gl(g, np.zeros_like(lw), lw, 64)
    return head


def radial_factor_2d(m: int, c, tau: float):
    """R(c) = int_0^inf rho^{2m-3} (1 - cos(c rho)) exp(-tau rho^2 / 2) d rho."""
    c = np.abs(np.asarray(c, dtype=float))
    j = m - 1
    if j == 0:
        return 2.0 * _dawson_integral(c / math.sqrt(2.0 * tau))
    x = c * c / (2.0 * tau)
    return 0.5 * special.gamma(j) * (2.0 / tau) ** j * (1.0 - special.hyp1f1(j, 0.5, -x))


def _radial_quad(m: int, c: float, tau: float, q: QuadratureConfig) -> float:
    k = 2 * m - 3
    rmax = math.sqrt(2.0 * (60.0 + max(k, 0) * 3.0) / tau)
    f = lambda r: (
        r**k * (1.0 - math.cos(c * r)) if r > 0 else 0.0
    ) * math.exp(-0.5 * tau * r * r)
    if k < 0:
        f = lambda r: (2.0 * math.sin(0.5 * c * r) ** 2 / r if r > 0 else 0.0) * math.exp(
            -0.5 * tau * r * r
        )
    step = math.pi / c if c > 0 else rmax
    pts = list(np.arange(step, rmax, step))[:300] or None
    return quad(f, 0.0, rmax, q, points=pts)[0]


def _index_counts(i: Sequence[int]) -> tuple[int, int]:
    idx = list(i)
    if len(idx) == 0 or len(idx) % 2 or any(v not in (1, 2) for v in idx):
        raise LabError("index vector must have even length with entries in {1, 2}")
    return idx.count(1), idx.count(2)


def phi_2d(
    i: Sequence[int],
    h: Sequence[float],
    t: float,
    s: float,
    q: QuadratureConfig = DEFAULT,
    method: str = "closed",
) -> float:
    """Phi_i(t, s) = int_{R^2} prod_k xi_{i_k} (1 - cos<h,xi>) |xi|^{-4} e^{-(t-s)|xi|^2/2} dxi.

    Polar coordinates: the angular integral is a periodic trapezoid rule
    refined until two successive levels agree; the radial integral is exact
    (hypergeometric form), or adaptive quadrature with ``method="quad"``.
    """
    a, b = _index_counts(i)
    m = (a + b) // 2
    hv = np.asarray(h, dtype=float)
    if hv.shape != (2,) or not np.any(hv != 0):
        raise LabError("h must be a non-zero 2-vector")
    if not s < t:
        raise LabError(f"need s < t, got s={s}, t={t}")
    tau = t - s

    def level(N: int) -> tuple[float, float]:
        th = 2.0 * math.pi * np.arange(N) / N
        c = hv[0] * np.cos(th) + hv[1] * np.sin(th)
        if method == "closed":
            rad = radial_factor_2d(m, c, tau)
        elif method == "quad":
            rad = np.array([_radial_quad(m, float(abs(cc)), tau, q) for cc in c])
        else:
            raise LabError(f"unknown method {method!r}")
        vals = np.cos(th) ** a * np.sin(th) ** b * rad
        w = 2.0 * math.pi / N
        return float(np.sum(vals) * w), float(np.sum(np.abs(vals)) * w)

    N = 64
    prev, _ = level(N)
    while True:
        N *= 2
        cur, mag = level(N)
        if abs(cur - prev) <= max(q.abs_tol, q.rel_tol * mag):
            return cur
        if N >= (1 << 16):
            raise QuadratureError("angular trapezoid rule did not converge")
        prev = cur
