"""Block representation of an 8-point singular simplex integral and
numerical convergence verdicts for three related integrals.

Points x_1..x_8 in [0, 1] with x_i < x_{i+4}; the singular factors are the
lengths of

    J1 = [x3 ^ x1, x7 v x5],  J2 = [x4 ^ x1, x8 v x5],
    J3 = [x3 ^ x2, x7 v x6],  J4 = [x4 ^ x2, x8 v x6].

On the simplex where x_{sigma(1)} < ... < x_{sigma(8)} each J_i spans a block
of consecutive ranks [m_i, n_i], so the integral is a sum of simplex integrals
I_{alpha,B} = int_{0<x_1<...<x_8<1} prod_i (x_{n_i} - x_{m_i})^{-alpha} dx.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .chaos import _merge, _moments
from .errors import LabError
from .parallel import map_blocks
from .quadrature import DEFAULT, QuadratureConfig

__all__ = [
    "BlockFamily",
    "EXTREMAL_FAMILIES",
    "MCEstimate",
    "Verdict",
    "blocks_from_permutation",
    "accepted_permutations",
    "accepted_families",
    "extremal_bound",
    "dominates",
    "block_integral",
    "enumeration_check",
    "clamped_integral",
    "clamped_integral_plain",
    "convergence_verdict",
]

# (left endpoints, right endpoints) of J1..J4 as 0-based variable indices
_J_LEFT = ((2, 0), (3, 0), (2, 1), (3, 1))
_J_RIGHT = ((6, 4), (7, 4), (6, 5), (7, 5))

Block = tuple[int, int]


@dataclass(frozen=True)
class BlockFamily:
    """Four rank intervals [m_i, n_i] inside {1..8}."""

    blocks: tuple[Block, Block, Block, Block]

    def __post_init__(self) -> None:
        if len(self.blocks) != 4:
            raise LabError("a block family has exactly four blocks")
        for m, n in self.blocks:
            if not 1 <= m < n <= 8:
                raise LabError(f"invalid block [{m}, {n}]")

    @classmethod
    def of(cls, *blocks: Sequence[int]) -> "BlockFamily":
        return cls(tuple((int(a), int(b)) for a, b in blocks))  # type: ignore[arg-type]

    @property
    def key(self) -> tuple[Block, ...]:
        """Order-free identity of the family."""
        return tuple(sorted(self.blocks))

    def mirrored(self) -> "BlockFamily":
        """Image under the rank reflection k -> 9 - k (leaves I_{alpha,B} unchanged)."""
        return BlockFamily(tuple((9 - n, 9 - m) for m, n in self.blocks))  # type: ignore[arg-type]

    def violations(self) -> list[str]:
        """Broken structural constraints; empty for families arising from D."""
        out = []
        sets = [set(range(m, n + 1)) for m, n in self.blocks]
        if any(len(s) < 4 for s in sets):
            out.append("a block has fewer than 4 points")
        if any(len(a | b) < 6 for a, b in itertools.combinations(sets, 2)):
            out.append("two blocks cover fewer than 6 points")
        if sum(m == 1 for m, _ in self.blocks) != 2:
            out.append("rank 1 is not the left end of exactly two blocks")
        if sum(n == 8 for _, n in self.blocks) != 2:
            out.append("rank 8 is not the right end of exactly two blocks")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def case(self) -> int:
        """1, 2 or 3 according to how many blocks contain both ranks 1 and 8, plus one."""
        return 1 + sum(b == (1, 8) for b in self.blocks)


EXTREMAL_FAMILIES: dict[str, BlockFamily] = {
    "B0": BlockFamily.of((1, 4), (1, 6), (5, 8), (3, 8)),
    "B1": BlockFamily.of((1, 8), (1, 4), (5, 8), (2, 5)),
    "B2": BlockFamily.of((1, 8), (1, 4), (5, 8), (3, 6)),
    "B3": BlockFamily.of((1, 8), (1, 8), (2, 5), (4, 7)),
    "B4": BlockFamily.of((1, 8), (1, 8), (2, 7), (3, 6)),
}
_CASE_CANDIDATES = {1: ("B0",), 2: ("B1", "B2"), 3: ("B3", "B4")}


def blocks_from_permutation(sigma: Sequence[int]) -> BlockFamily | None:
    """Block family on S^sigma = {x_sigma(1) < ... < x_sigma(8)}, or None when S^sigma is not in D.

    ``sigma`` lists variable labels 1..8 in increasing order of the points.
    """
    sig = [int(v) for v in sigma]
    if sorted(sig) != list(range(1, 9)):
        raise LabError("sigma must be a permutation of 1..8")
    rank = [0] * 8
    for pos, var in enumerate(sig, start=1):
        rank[var - 1] = pos
    if any(rank[i] > rank[i + 4] for i in range(4)):
        return None
    blocks = tuple(
        (min(rank[a], rank[b]), max(rank[c], rank[d]))
        for (a, b), (c, d) in zip(_J_LEFT, _J_RIGHT)
    )
    return BlockFamily(blocks)  # type: ignore[arg-type]


def accepted_permutations() -> list[tuple[tuple[int, ...], BlockFamily]]:
    """All orderings compatible with D, with their block families."""
    out = []
    for sig in itertools.permutations(range(1, 9)):
        fam = blocks_from_permutation(sig)
        if fam is not None:
            out.append((sig, fam))
    return out


def accepted_families() -> Counter:
    """Distinct families (by ``key``) with their multiplicities over accepted orderings."""
    return Counter(fam.key for _, fam in accepted_permutations())


def dominates(ext: BlockFamily, fam: BlockFamily) -> bool:
    """True when some matching puts every block of ``ext`` inside a block of ``fam``.

    Shrinking an interval shortens its length, so I_{alpha,fam} <= I_{alpha,ext}.
    """
    for perm in itertools.permutations(fam.blocks):
        if all(f[0] <= e[0] and e[1] <= f[1] for e, f in zip(ext.blocks, perm)):
            return True
    return False


def extremal_bound(fam: BlockFamily) -> str:
    """Name of the extremal family that dominates ``fam`` (possibly after mirroring)."""
    bad = fam.violations()
    if bad:
        raise LabError("invalid block family: " + "; ".join(bad))
    for name in _CASE_CANDIDATES[fam.case()]:
        ext = EXTREMAL_FAMILIES[name]
        if dominates(ext, fam) or dominates(ext.mirrored(), fam):
            return name
    raise LabError(f"no extremal family dominates {fam.key}")


# ---------------------------------------------------------------------------
# Regularized simplex integrals


class MCEstimate(NamedTuple):
    value: float
    stderr: float
    n: int


_INV_8_FACT = 1.0 / math.factorial(8)


def _family_arrays(fams: Sequence[BlockFamily]) -> tuple[np.ndarray, np.ndarray]:
    lo = np.array([[m - 1 for m, _ in f.blocks] for f in fams])
    hi = np.array([[n - 1 for _, n in f.blocks] for f in fams])
    return lo, hi


def _clamped_product(x: np.ndarray, lo: np.ndarray, hi: np.ndarray, alpha: float, eps: float):
    """prod_i max(x[hi_i] - x[lo_i], eps)^-alpha for sorted samples x (n, 8)."""
    length = np.maximum(x[:, hi] - x[:, lo], eps)
    return np.exp(-alpha * np.sum(np.log(length), axis=-1))


def block_integral(
    alpha: float, fam: BlockFamily, eps: float, n_mc: int = 200_000, seed: int = 0
) -> MCEstimate:
    """MC estimate of I_{alpha,B} with each factor clamped below at eps.

    Sorted uniforms are uniform on the ordered simplex; its volume 1/8! is
    applied explicitly.
    """
    if alpha < 0:
        raise LabError("alpha must be non-negative")
    if not eps > 0:
        raise LabError("eps must be positive")
    if n_mc < 1:
        raise LabError("n_mc must be positive")
    lo, hi = _family_arrays([fam])

    def block(rng: np.random.Generator, size: int):
        x = np.sort(rng.random((size, 8)), axis=1)
        return _moments(_clamped_product(x, lo[0], hi[0], alpha, eps) * _INV_8_FACT)

    mean, se, n = _merge(map_blocks(block, seed, n_mc))
    return MCEstimate(mean, se, n)


def _direct_lengths(x: np.ndarray) -> np.ndarray:
    left = np.stack([np.minimum(x[:, a], x[:, b]) for a, b in _J_LEFT], axis=1)
    right = np.stack([np.maximum(x[:, a], x[:, b]) for a, b in _J_RIGHT], axis=1)
    return right - left


def enumeration_check(
    alpha: float, eps: float, n_mc: int = 400_000, seed: int = 0
) -> tuple[MCEstimate, MCEstimate]:
    """(sum over accepted orderings of block integrals, direct integral over D).

    Both are MC estimates with independent streams; the first sums all
    families on each sorted sample with their multiplicities.
    """
    counts = accepted_families()
    fams = [BlockFamily(k) for k in counts]  # type: ignore[arg-type]
    mult = np.array([counts[f.key] for f in fams], dtype=float)
    lo, hi = _family_arrays(fams)

    def by_blocks(rng: np.random.Generator, size: int):
        x = np.sort(rng.random((size, 8)), axis=1)
        length = np.maximum(x[:, hi] - x[:, lo], eps)  # (size, n_fam, 4)
        vals = np.exp(-alpha * np.log(length).sum(axis=-1)) @ mult
        return _moments(vals * _INV_8_FACT)

    def direct(rng: np.random.Generator, size: int):
        x = rng.random((size, 8))
        inside = np.all(x[:, :4] < x[:, 4:], axis=1)
        length = np.maximum(_direct_lengths(x), eps)
        return _moments(np.where(inside, np.exp(-alpha * np.log(length).sum(axis=1)), 0.0))

    seeds = np.random.SeedSequence(seed).generate_state(2)
    a = _merge(map_blocks(by_blocks, int(seeds[0]), n_mc, block=1 << 13))
    b = _merge(map_blocks(direct, int(seeds[1]), n_mc))
    return MCEstimate(*a), MCEstimate(*b)


# ---------------------------------------------------------------------------
# The three singular integrals and their verdicts

# exponent multiplier and number of coordinates
_INTEGRALS = {"sing1": (3, 4), "sing2": (5, 6), "sing3": (7, 8)}


def _factor_lengths(integral_id: str, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(lengths (n, 4), domain indicator (n,)) for coordinates y (n, N)."""
    if integral_id == "sing1":
        s, t = y[:, 0:2], y[:, 2:4]
        ell = np.abs(s[:, :, None] - t[:, None, :]).reshape(len(y), 4)
        return ell, np.ones(len(y), dtype=bool)
    if integral_id == "sing2":
        s = y[:, 0:2]
        t1, t2 = y[:, [2, 4]], y[:, [3, 5]]
        inside = np.all(t1 < t2, axis=1)
        hi = np.maximum(s[:, :, None], t2[:, None, :])
        lo = np.minimum(s[:, :, None], t1[:, None, :])
        return (hi - lo).reshape(len(y), 4), inside
    if integral_id == "sing3":
        # sigma^1 = (x1, x5), sigma^2 = (x2, x6), tau^1 = (x3, x7), tau^2 = (x4, x8)
        return _direct_lengths(y), np.all(y[:, :4] < y[:, 4:], axis=1)
    raise LabError(f"unknown integral {integral_id!r}; expected sing1, sing2 or sing3")


def _power_integral(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    """int_a^b (1 - r) r^p dr, elementwise, for 0 <= a <= b <= 1."""

    def mono(s):  # int_a^b r^{s-1} dr
        with np.errstate(divide="ignore", invalid="ignore"):
            gen = (b**s - a**s) / np.where(s == 0, 1.0, s)
            log = np.log(np.where(b > 0, b, 1.0) / np.where(a > 0, a, 1.0))
        return np.where(np.abs(s) < 1e-12, log, gen)

    out = mono(p + 1.0) - mono(p + 2.0)
    return np.where(b > a, out, 0.0)


def _radial_integral(ell: np.ndarray, n_coords: int, alpha: float, eps: float) -> np.ndarray:
    """int_0^1 (1 - r) r^{N-2} prod_k max(r ell_k, eps)^-alpha dr, exactly, per sample."""
    with np.errstate(divide="ignore"):
        brk = np.minimum(eps / ell, 1.0)
    order = np.argsort(brk, axis=1)
    brk = np.take_along_axis(brk, order, axis=1)
    ell_sorted = np.take_along_axis(ell, order, axis=1)
    n = len(ell)
    edges = np.concatenate([np.zeros((n, 1)), brk, np.ones((n, 1))], axis=1)
    log_ell = np.log(ell_sorted)
    total = np.zeros(n)
    cum = np.zeros(n)  # sum of log ell over unclamped factors
    for i in range(5):
        if i > 0:
            cum = cum + log_ell[:, i - 1]
        n_clamped = 4 - i
        p = np.full(n, n_coords - 2.0 - alpha * i)
        coef = np.exp(-alpha * (cum + n_clamped * math.log(eps)))
        total += coef * _power_integral(edges[:, i], edges[:, i + 1], p)
    return total


def clamped_integral(
    integral_id: str,
    delta: float,
    eps: Sequence[float],
    n_mc: int = 200_000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Values and standard errors of an integral with factors clamped at each eps.

    Points are written as x = a + r y with r the spread max - min and y a
    shape whose min and max are 0 and 1; the r-integral is done exactly per
    sampled shape, so one set of shapes serves every eps.
    """
    if integral_id not in _INTEGRALS:
        raise LabError(f"unknown integral {integral_id!r}; expected sing1, sing2 or sing3")
    if not delta > 0:
        raise LabError("delta must be positive")
    eps = np.asarray(eps, dtype=float)
    if np.any(eps <= 0):
        raise LabError("eps values must be positive")
    k, N = _INTEGRALS[integral_id]
    alpha = k * delta

    def block(rng: np.random.Generator, size: int):
        y = rng.random((size, N))
        pick = rng.random((size, N)).argsort(axis=1)[:, :2]
        rows = np.arange(size)
        y[rows, pick[:, 0]] = 0.0
        y[rows, pick[:, 1]] = 1.0
        ell, inside = _factor_lengths(integral_id, y)
        ell = np.where(inside[:, None], ell, 1.0)
        stats = []
        for e in eps:
            v = np.where(inside, _radial_integral(ell, N, alpha, e), 0.0) * N * (N - 1)
            stats.append(_moments(v))
        return stats

    parts = map_blocks(block, seed, n_mc)
    vals, errs = [], []
    for j in range(len(eps)):
        mean, se, _ = _merge([p[j] for p in parts])
        vals.append(mean)
        errs.append(se)
    return np.array(vals), np.array(errs)


def clamped_integral_plain(
    integral_id: str, delta: float, eps: float, n_mc: int = 400_000, seed: int = 0
) -> MCEstimate:
    """Plain MC of the clamped integral over the unit cube (cross-check only)."""
    if integral_id not in _INTEGRALS:
        raise LabError(f"unknown integral {integral_id!r}")
    k, N = _INTEGRALS[integral_id]
    alpha = k * delta

    def block(rng: np.random.Generator, size: int):
        ell, inside = _factor_lengths(integral_id, rng.random((size, N)))
        v = np.exp(-alpha * np.log(np.maximum(ell, eps)).sum(axis=1))
        return _moments(np.where(inside, v, 0.0))

    return MCEstimate(*_merge(map_blocks(block, seed, n_mc)))


@dataclass(frozen=True)
class Verdict:
    """Convergence classification of a clamped singular integral.

    ``fitted_growth`` is the slope of ln(increment per eps-decade) against
    ln(1/eps): negative means geometrically shrinking increments (a Cauchy
    sequence), zero means logarithmic growth, positive means power growth.
    """

    integral_id: str
    delta: float
    status: str
    fitted_growth: float
    growth_stderr: float
    evidence: tuple[tuple[float, float], ...]
    log_slope: float = float("nan")
    log_slope_stderr: float = float("nan")
    model: str = ""
    stderr: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        eps = [e for e, _ in self.evidence]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise LabError("evidence must be strictly decreasing in eps")


_ROUNDOFF = 1e-11


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(len(x) - 2, 1)
    cov = np.linalg.inv(A.T @ A) * float(resid @ resid) / dof
    return float(coef[0]), math.sqrt(max(cov[0, 0], 0.0))


def convergence_verdict(
    integral_id: str,
    delta: float,
    q: QuadratureConfig = DEFAULT,
    n_mc: int = 200_000,
    seed: int = 0,
    eps_max: float = 1e-1,
    decades: int = 12,
    margin: float = 0.03,
) -> Verdict:
    """Classify the integral as converging, diverging or inconclusive.

    Increments between successive eps decades are fitted on log axes against
    ln(1/eps) using the last four increments above round-off.  Increments that
    all vanish to round-off also count as converging.  ``converges`` needs the growth
    slope below -margin by three standard errors; ``diverges`` needs it above
    -margin by three standard errors, which covers the logarithmic case at the
    threshold.  Anything else is ``inconclusive``.
    """
    if decades < 4:
        raise LabError("need at least four decades")
    eps = eps_max * 10.0 ** -np.arange(decades + 1, dtype=float)
    vals, errs = clamped_integral(integral_id, delta, eps, n_mc, seed)
    inc = np.diff(vals)
    x = np.log(1.0 / eps)[1:]
    floor = _ROUNDOFF * np.maximum(np.abs(vals[1:]), np.abs(vals[:-1]))
    resolved = np.flatnonzero(inc > floor)
    growth = gse = float("nan")
    if len(resolved) >= 2:
        idx = resolved[-4:]
        growth, gse = _ols(x[idx], np.log(inc[idx]))
    if np.all(np.abs(inc[-3:]) <= 10.0 * floor[-3:]):
        # increments vanished to round-off: the values are a Cauchy sequence
        status = "converges"
    elif len(resolved) < 3 or resolved[-1] != len(inc) - 1:
        status = "inconclusive"
    else:
        tol = max(3.0 * gse, q.rel_tol)
        if growth + tol < -margin:
            status = "converges"
        elif growth - tol > -margin:
            status = "diverges"
        else:
            status = "inconclusive"
    log_slope, log_se = _ols(x[-4:], vals[-4:])
    model = "power" if growth > margin else ("log" if status == "diverges" else "bounded")
    return Verdict(
        integral_id, float(delta), status, float(growth), float(gse),
        tuple(zip(eps.tolist(), vals.tolist())), log_slope, log_se, model,
        tuple(errs.tolist()),
    )
