"""Brownian paths and path functionals built on occupation histograms.

Local time is estimated by the exact occupation density of the piecewise
linear interpolation of the sampled path, averaged over bins of width ``w``.
Functionals of the form int int F(B_v - B_u) du dv are then evaluated as
w^2 sum_{i,j} m_i m_j A_F((i - j) w), where A_F is the average of F over a
pair of cells; this is exact for the piecewise constant density and keeps
integrable singularities finite without clipping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, signal, special

from .errors import LabError
from .gaussian import heat_kernel
from .quadrature import DEFAULT, QuadratureConfig
from .riesz import riesz_constant_c_gamma

__all__ = [
    "Path",
    "LocalTimeField",
    "Discretization",
    "PathFunctionalResult",
    "sample_path",
    "local_time_field",
    "l2_modulus_H",
    "l2_modulus_H_pairs",
    "expected_H",
    "riesz_hamiltonian",
    "riesz_hamiltonian_sweep",
    "self_intersection_lt",
    "oscillatory_time_integral",
    "local_time_along_path",
    "local_time_modulus",
]


@dataclass(frozen=True)
class Path:
    """Sampled Brownian path; ``values`` has shape (n_steps + 1, dim)."""

    dim: int
    dt: float
    values: np.ndarray
    seed: int

    @property
    def n_steps(self) -> int:
        return len(self.values) - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    def coord(self, k: int = 0) -> np.ndarray:
        return self.values[:, k]

    def coarsen(self, factor: int) -> "Path":
        """Same path observed every ``factor`` steps."""
        if factor < 1 or self.n_steps % factor:
            raise LabError(f"factor {factor} must divide n_steps = {self.n_steps}")
        return Path(self.dim, self.dt * factor, self.values[::factor], self.seed)


def sample_path(dim: int, n_steps: int, T: float = 1.0, seed: int = 0) -> Path:
    """Gaussian-increment path on [0, T] started at the origin."""
    if dim not in (1, 2):
        raise LabError(f"dim must be 1 or 2, got {dim}")
    if not isinstance(n_steps, (int, np.integer)) or n_steps < 1:
        raise LabError(f"n_steps must be a positive integer, got {n_steps!r}")
    if not 0.0 < T <= 1.0:
        raise LabError(f"horizon must lie in (0, 1], got {T}")
    dt = T / n_steps
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal((n_steps, dim)) * math.sqrt(dt)
    values = np.zeros((n_steps + 1, dim))
    np.cumsum(inc, axis=0, out=values[1:])
    return Path(dim, dt, values, seed)


@dataclass(frozen=True)
class LocalTimeField:
    """Occupation density on bins [grid_min + j w, grid_min + (j + 1) w)."""

    grid_min: float
    grid_max: float
    bin_width: float
    mass: np.ndarray
    horizon: float

    @property
    def centers(self) -> np.ndarray:
        return self.grid_min + (np.arange(len(self.mass)) + 0.5) * self.bin_width

    def __call__(self, x) -> np.ndarray:
        """Piecewise constant evaluation; zero outside the grid."""
        x = np.asarray(x, dtype=float)
        j = np.floor((x - self.grid_min) / self.bin_width).astype(np.int64)
        ok = (j >= 0) & (j < len(self.mass))
        return np.where(ok, self.mass[np.clip(j, 0, len(self.mass) - 1)], 0.0)

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """int L(x) f(x) dx by the midpoint rule on the bins."""
        return float(np.sum(self.mass * f(self.centers)) * self.bin_width)


@dataclass(frozen=True)
class Discretization:
    dt: float
    bin_width: float
    eps: float | None = None


@dataclass(frozen=True)
class PathFunctionalResult:
    value: float
    discretization: Discretization
    path_seed: int


def _require_1d(path: Path) -> np.ndarray:
    if path.dim != 1:
        raise LabError("this functional needs a 1-d path")
    return path.coord(0)


def _default_width(path: Path, bin_width: float | None) -> float:
    w = math.sqrt(path.dt) if bin_width is None else float(bin_width)
    if not w > 0:
        raise LabError(f"bin_width must be positive, got {bin_width}")
    return w


def local_time_field(
    path: Path, bin_width: float | None = None, upto: int | None = None
) -> LocalTimeField:
    """Occupation density of the linearly interpolated path over [0, upto * dt].

    Bins are centered on multiples of ``bin_width`` (zero is a bin center).
    Each step deposits dt split in proportion to the length it spends in
    each bin, so sum(mass) * bin_width equals the horizon.
    """
    x = _require_1d(path)
    w = _default_width(path, bin_width)
    n = path.n_steps if upto is None else int(upto)
    if not 0 <= n <= path.n_steps:
        raise LabError(f"upto must lie in [0, {path.n_steps}], got {upto}")
    x = x[: n + 1]
    j0 = math.floor(float(x.min()) / w + 0.5) - 1
    j1 = math.floor(float(x.max()) / w + 0.5) + 1
    grid_min = (j0 - 0.5) * w
    nbins = j1 - j0 + 1
    time = np.zeros(nbins)
    if n > 0:
        u = (x - grid_min) / w  # bin coordinates
        a, b = u[:-1], u[1:]
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        ilo = np.floor(lo).astype(np.int64)
        ihi = np.floor(hi).astype(np.int64)
        same = ilo == ihi
        time += np.bincount(ilo[same], minlength=nbins) * path.dt
        lo, hi, ilo, ihi = lo[~same], hi[~same], ilo[~same], ihi[~same]
        if len(lo):
            rate = path.dt / (hi - lo)  # time per unit of bin coordinate
            time += np.bincount(ilo, weights=(ilo + 1 - lo) * rate, minlength=nbins)
            time += np.bincount(ihi, weights=(hi - ihi) * rate, minlength=nbins)
            inner = ihi - ilo - 1
            if inner.sum():
                start = np.repeat(ilo + 1, inner)
                offs = np.arange(inner.sum()) - np.repeat(np.cumsum(inner) - inner, inner)
                time += np.bincount(start + offs, weights=np.repeat(rate, inner), minlength=nbins)
    return LocalTimeField(grid_min, grid_min + nbins * w, w, time / w, n * path.dt)


# ---------------------------------------------------------------------------
# Cell-averaged kernels


def _autocorr(mass: np.ndarray) -> np.ndarray:
    """C_k = sum_i m_i m_{i+k} for k = -(n-1)..(n-1)."""
    c = signal.fftconvolve(mass, mass[::-1])
    return 0.5 * (c + c[::-1])


def _lags(n: int, w: float) -> np.ndarray:
    return np.arange(-(n - 1), n) * w


def _second_difference(F2: Callable[[np.ndarray], np.ndarray], z: np.ndarray, w: float):
    """Average of F'' over two cells at offset z: (1/w^2) int (w - |s|)_+ F''(z + s) ds."""
    return (F2(z + w) - 2.0 * F2(z) + F2(z - w)) / (w * w)


def _gauss_F2(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    s = math.sqrt(eps)
    return lambda x: x * special.ndtr(x / s) + eps * heat_kernel(eps, x)


def _riesz_F2(beta: float) -> Callable[[np.ndarray], np.ndarray]:
    c = 1.0 / ((1.0 - beta) * (2.0 - beta))
    return lambda x: c * np.abs(x) ** (2.0 - beta)


def _tri(z: np.ndarray, w: float) -> np.ndarray:
    return np.maximum(w - np.abs(z), 0.0)


def _check_h(h: float, w: float) -> float:
    h = abs(float(h))
    if 0.0 < h < w:
        raise LabError(f"|h| = {h} is below the bin width {w}; refine the grid")
    return h


def l2_modulus_H(
    path: Path, h: float, bin_width: float | None = None, eps: float | None = None
) -> PathFunctionalResult:
    """int (L_t(x + h) - L_t(x))^2 dx on the occupation histogram.

    With ``eps`` the density is first smoothed by p_{eps/2}, which gives the
    p_eps-mollified pair sum int int [2 p_eps(z) - p_eps(z + h) - p_eps(z - h)],
    z = B_v - B_u.
    """
    field = local_time_field(path, bin_width)
    w = field.bin_width
    h = _check_h(h, w)
    disc = Discretization(path.dt, w, eps)
    if h == 0.0:
        return PathFunctionalResult(0.0, disc, path.seed)
    C = _autocorr(field.mass)
    z = _lags(len(field.mass), w)
    if eps is None:
        # R(s) = int L(x) L(x + s) dx = sum_k C_k (w - |s - k w|)_+
        val = 2.0 * C[len(field.mass) - 1] * w - 2.0 * np.dot(C, _tri(z - h, w))
    else:
        if not eps > 0:
            raise LabError("eps must be positive")
        F2 = _gauss_F2(eps)
        ker = 2.0 * _second_difference(F2, z, w) - 2.0 * _second_difference(F2, z - h, w)
        val = w * w * float(np.dot(C, ker))
    return PathFunctionalResult(max(float(val), 0.0), disc, path.seed)


def _pair_sum(x: np.ndarray, kernel: Callable[[np.ndarray], np.ndarray], dt: float,
              strict: bool = False, chunk: int = 1024) -> float:
    """sum over ordered time pairs (u, v) of kernel(x_v - x_u) dt^2.

    Uses left-point samples x_0..x_{N-1}; ``strict`` keeps only u < v.
    """
    pts = x[:-1]
    n = len(pts)
    total = 0.0
    for s in range(0, n, chunk):
        blk = pts[s : s + chunk]
        d = pts[None, :] - blk[:, None]
        k = kernel(d)
        if strict:
            k = np.where(np.arange(n)[None, :] > np.arange(s, s + len(blk))[:, None], k, 0.0)
        total += float(np.sum(k))
    return total * dt * dt


def l2_modulus_H_pairs(path: Path, h: float, eps: float | None = None) -> PathFunctionalResult:
    """Mollified pair-sum form of the L^2 modulus with p_eps in place of delta."""
    x = _require_1d(path)
    eps = 4.0 * path.dt if eps is None else float(eps)
    if not eps > 0:
        raise LabError("eps must be positive")
    h = abs(float(h))

    def ker(d):
        return 2.0 * heat_kernel(eps, d) - heat_kernel(eps, d + h) - heat_kernel(eps, d - h)

    val = _pair_sum(x, ker, path.dt) if h > 0 else 0.0
    return PathFunctionalResult(val, Discretization(path.dt, 0.0, eps), path.seed)


def expected_H(h: float, t: float = 1.0, eps: float = 0.0, q: QuadratureConfig = DEFAULT) -> float:
    """E int int [2 p_eps(z) - p_eps(z + h) - p_eps(z - h)] du dv with z = B_v - B_u.

    Equals 4 int_0^t (t - r) (p_{r+eps}(0) - p_{r+eps}(h)) dr; eps = 0 is the
    unmollified modulus.
    """
    h = abs(float(h))
    if h == 0.0:
        return 0.0

    def f(r):
        s = r + eps
        return (t - r) * (heat_kernel(s, 0.0) - heat_kernel(s, h)) if s > 0 else 0.0

    val, _ = integrate.quad(f, 0.0, t, points=[min(h * h, t)], epsabs=q.abs_tol,
                            epsrel=q.rel_tol, limit=q.max_subdivisions)
    return 4.0 * val


# ---------------------------------------------------------------------------
# Riesz Hamiltonian


def _check_gamma(gamma: float) -> float:
    if not 0.75 < gamma < 1.0:
        raise LabError(f"gamma must lie in (3/4, 1), got {gamma}")
    return 2.0 * gamma - 1.0


def riesz_hamiltonian_sweep(
    path: Path,
    hs,
    gamma: float,
    bin_width: float | None = None,
    c_gamma: float | None = None,
) -> np.ndarray:
    """Binned Riesz Hamiltonian for several shifts from one histogram."""
    beta = _check_gamma(gamma)
    field = local_time_field(path, bin_width)
    w = field.bin_width
    hs = [_check_h(h, w) for h in np.atleast_1d(hs)]
    c = riesz_constant_c_gamma(gamma) if c_gamma is None else c_gamma
    C = _autocorr(field.mass)
    z = _lags(len(field.mass), w)
    F2 = _riesz_F2(beta)
    base = _second_difference(F2, z, w)
    out = []
    for h in hs:
        if h == 0.0:
            out.append(0.0)
            continue
        ker = 2.0 * base - _second_difference(F2, z + h, w) - _second_difference(F2, z - h, w)
        out.append(c * w * w * float(np.dot(C, ker)))
    return np.array(out)


def riesz_hamiltonian(
    path: Path,
    h: float,
    gamma: float,
    clip: float | None = None,
    bin_width: float | None = None,
    method: str = "binned",
) -> PathFunctionalResult:
    """c_gamma int int [2 f(z) - f(z + h) - f(z - h)] du dv, f(z) = |z|^{-beta}, beta = 2 gamma - 1.

    ``binned`` integrates the exact kernel against the occupation histogram.
    ``pairs`` sums over time pairs with |z| floored at ``clip`` (default
    sqrt(dt)); that floor leaves an error of order h clip^{1 - beta}, so it is
    only a cross-check on short paths.
    """
    beta = _check_gamma(gamma)
    if method == "binned":
        w = _default_width(path, bin_width)
        val = float(riesz_hamiltonian_sweep(path, [h], gamma, w)[0])
        return PathFunctionalResult(val, Discretization(path.dt, w), path.seed)
    if method != "pairs":
        raise LabError(f"unknown method {method!r}")
    x = _require_1d(path)
    clip = math.sqrt(path.dt) if clip is None else float(clip)
    if not clip > 0:
        raise LabError("clip must be positive")
    h = abs(float(h))
    if h == 0.0:
        return PathFunctionalResult(0.0, Discretization(path.dt, clip), path.seed)

    def f(z):
        return np.maximum(np.abs(z), clip) ** -beta

    val = riesz_constant_c_gamma(gamma) * _pair_sum(x, lambda d: 2 * f(d) - f(d + h) - f(d - h), path.dt)
    return PathFunctionalResult(val, Discretization(path.dt, clip), path.seed)


# ---------------------------------------------------------------------------
# Self-intersection local time and oscillatory integrals


def self_intersection_lt(
    path: Path,
    eps: float | None = None,
    bin_width: float | None = None,
    upto: int | None = None,
    method: str = "binned",
) -> PathFunctionalResult:
    """p_eps-mollified self-intersection local time int_0^t int_0^v p_eps(B_v - B_u) du dv.

    Default eps is 4 dt.  ``binned`` halves the full double integral computed
    from the histogram; ``pairs`` sums over u < v directly.
    """
    if path.dim != 1:
        raise LabError("self-intersection local time diverges in dimension 2")
    eps = 4.0 * path.dt if eps is None else float(eps)
    if not eps > 0:
        raise LabError("eps must be positive")
    if method == "pairs":
        n = path.n_steps if upto is None else int(upto)
        x = path.coord(0)[: n + 1]
        val = _pair_sum(x, lambda d: heat_kernel(eps, d), path.dt, strict=True)
        return PathFunctionalResult(val, Discretization(path.dt, 0.0, eps), path.seed)
    if method != "binned":
        raise LabError(f"unknown method {method!r}")
    field = local_time_field(path, bin_width, upto)
    w = field.bin_width
    C = _autocorr(field.mass)
    z = _lags(len(field.mass), w)
    val = 0.5 * w * w * float(np.dot(C, _second_difference(_gauss_F2(eps), z, w)))
    return PathFunctionalResult(val, Discretization(path.dt, w, eps), path.seed)


def oscillatory_time_integral(path: Path, r: float, xi: float) -> complex:
    """Left Riemann sum of int_0^r exp(i xi (B_r - B_u)) du on the time grid.

    A partial last cell is included and B_r is linearly interpolated.
    """
    x = _require_1d(path)
    if not 0.0 < r <= path.horizon * (1 + 1e-12):
        raise LabError(f"r must lie in (0, {path.horizon}], got {r}")
    r = min(r, path.horizon)
    k = min(int(math.floor(r / path.dt + 1e-9)), path.n_steps)
    frac = r - k * path.dt
    if k < path.n_steps:
        b_r = x[k] + (x[k + 1] - x[k]) * frac / path.dt
    else:
        b_r, frac = x[k], 0.0
    phase = np.exp(1j * xi * (b_r - x[:k]))
    return complex(phase.sum() * path.dt + frac * np.exp(1j * xi * (b_r - x[k])))


# ---------------------------------------------------------------------------
# Diagnostics for the local-time moment bounds


def local_time_along_path(path: Path, steps, xs, bin_width: float | None = None) -> np.ndarray:
    """Array [i, j] = L_{t_i}(x_j + B_{t_i}) for t_i = steps[i] * dt."""
    out = np.empty((len(steps), len(xs)))
    x = _require_1d(path)
    for i, k in enumerate(steps):
        field = local_time_field(path, bin_width, int(k))
        out[i] = field(np.asarray(xs, dtype=float) + x[int(k)])
    return out


def local_time_modulus(field: LocalTimeField, delta: float) -> float:
    """sup over bin pairs closer than ``delta`` of |L(x) - L(y)|."""
    lag = int(math.floor(delta / field.bin_width))
    m = field.mass
    best = 0.0
    for k in range(1, min(lag, len(m) - 1) + 1):
        best = max(best, float(np.max(np.abs(m[k:] - m[:-k]))))
    return best
