"""Experiment configs, log-log fitting and CSV/JSON reporting.

Config files are flat ``key = value`` text; ``#`` starts a comment and lists
are comma separated.  Every run writes ``<output>.csv`` (data),
``<output>.json`` (config echo, seeds, results) and
``<output>.provenance.json`` (git describe and wall time).  The first two are
byte-identical across repeat runs; the provenance file is not.
"""

from __future__ import annotations

import csv
import io
import json
import math
import subprocess
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path as FsPath
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from . import brownian, simplex, variance
from .errors import ExperimentError, LabError
from .parallel import derive_seeds, map_items
from .riesz import riesz_constant_c_gamma

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "LogLogFit",
    "ScalingReport",
    "TableReport",
    "fit_loglog",
    "parse_config",
    "load_config",
    "run_experiment",
    "mixture_diagnostic",
    "report_text",
]

EXPERIMENTS = (
    "riesz-scaling",
    "modulus-scaling",
    "variance-table-1d",
    "variance-table-2d",
    "appendix-sweep",
    "mixture-diagnostic",
)


# ---------------------------------------------------------------------------
# Fitting


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    ci: tuple[float, float]
    stderr: float


def fit_loglog(points: Sequence[tuple[float, float]], level: float = 0.95) -> LogLogFit:
    """OLS of ln y on ln h with an HC1 (heteroscedasticity-robust) interval."""
    pts = [(float(h), float(y)) for h, y in points]
    if len(pts) < 4:
        raise LabError(f"need at least 4 points, got {len(pts)}")
    if any(not (h > 0 and y > 0) for h, y in pts):
        raise LabError("fit_loglog needs positive h and y")
    x = np.log([h for h, _ in pts])
    y = np.log([v for _, v in pts])
    n = len(x)
    X = np.column_stack([x, np.ones(n)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    bread = np.linalg.inv(X.T @ X)
    meat = X.T @ (X * (resid**2)[:, None])
    cov = bread @ meat @ bread * n / (n - 2)
    se = math.sqrt(max(cov[0, 0], 0.0))
    half = stats.t.ppf(0.5 + level / 2, n - 2) * se
    slope = float(coef[0])
    return LogLogFit(slope, float(coef[1]), (slope - half, slope + half), se)


@dataclass(frozen=True)
class ScalingReport:
    points: tuple[tuple[float, float, float], ...]
    slope: float
    slope_ci: tuple[float, float]
    target_slope: float
    tolerance: float
    verdict: str
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, points, target: float, tolerance: float, extra=None) -> "ScalingReport":
        fit = fit_loglog([(h, y) for h, y, _ in points])
        lo, hi = fit.ci
        ok = lo - tolerance <= target <= hi + tolerance
        return cls(tuple(points), fit.slope, fit.ci, target, tolerance,
                   "pass" if ok else "fail", dict(extra or {}))


@dataclass(frozen=True)
class TableReport:
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    summary: dict


# ---------------------------------------------------------------------------
# Config


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    parameters: dict
    output_path: str = ""

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise LabError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        grid = self.parameters.get("h_grid")
        if grid is not None:
            g = list(np.atleast_1d(grid))
            if any(b >= a for a, b in zip(g, g[1:])):
                raise LabError("h_grid must be strictly decreasing")
            if self.experiment in ("riesz-scaling", "modulus-scaling") and len(g) < 4:
                raise LabError("slope fits need at least 4 h values")

    def get(self, key: str, default: Any = None) -> Any:
        return self.parameters.get(key, DEFAULTS[self.experiment].get(key, default))


DEFAULTS: dict[str, dict[str, Any]] = {
    "riesz-scaling": dict(gamma=0.8, h_grid=[0.4, 0.2, 0.1, 0.05], paths=2000,
                          steps=16384, seed=1, tolerance=0.3),
    "modulus-scaling": dict(m=1, s=1.0, h_grid=[1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
                            tolerance=0.05),
    "variance-table-1d": dict(m_list=[1, 2], h_grid=[1e-3, 1e-4, 1e-5, 1e-6], s=1.0),
    "variance-table-2d": dict(m_max=12),
    "appendix-sweep": dict(deltas=[0.15, 0.2, 0.24, 0.26, 0.3, 0.5],
                           integrals=["sing1", "sing2", "sing3"], n_mc=200000, seed=1),
    "mixture-diagnostic": dict(gamma=0.8, h=0.1, paths=2000, steps=16384, seed=1, null=0),
}


def _parse_scalar(text: str) -> Any:
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


_LIST_KEYS = {"h_grid", "m_list", "deltas", "integrals"}


def parse_config(text: str) -> ExperimentConfig:
    """Parse flat ``key = value`` text; ``experiment`` is required, ``output`` optional."""
    params: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LabError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        parts = [_parse_scalar(p.strip()) for p in val.split(",") if p.strip()]
        params[key] = parts if ("," in val or key in _LIST_KEYS) else parts[0] if parts else ""
    exp = params.pop("experiment", None)
    if exp is None:
        raise LabError("config needs an 'experiment' key")
    out = str(params.pop("output", ""))
    return ExperimentConfig(str(exp), params, out)


def load_config(path: str) -> ExperimentConfig:
    return parse_config(FsPath(path).read_text())


# ---------------------------------------------------------------------------
# Output


@dataclass(frozen=True)
class Column:
    name: str
    unit: str
    source: str


class CsvSink:
    """Writes a header of (column, unit, provenance) then flushes every row."""

    def __init__(self, path: str | None, columns: Sequence[Column]):
        self.columns = list(columns)
        self.rows: list[tuple] = []
        self._fh = open(path, "w", newline="") if path else None
        if self._fh:
            w = csv.writer(self._fh, lineterminator="\n")
            w.writerow([c.name for c in self.columns])
            w.writerow([c.unit for c in self.columns])
            w.writerow([c.source for c in self.columns])
            self._fh.flush()

    def add(self, row: Sequence) -> None:
        row = tuple(row)
        self.rows.append(row)
        if self._fh:
            csv.writer(self._fh, lineterminator="\n").writerow([_fmt(v) for v in row])
            self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()


def _fmt(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=FsPath(__file__).parent, capture_output=True, text=True,
                             timeout=10)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _write_reports(cfg: ExperimentConfig, report, seeds: dict, wall: float) -> None:
    if not cfg.output_path:
        return
    body = {
        "experiment": cfg.experiment,
        "config": {k: cfg.get(k) for k in sorted(set(DEFAULTS[cfg.experiment]) | set(cfg.parameters))},
        "seeds": seeds,
        "report": asdict(report),
    }
    FsPath(cfg.output_path + ".json").write_text(
        json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
    prov = {"git_describe": _git_describe(), "wall_time_s": round(wall, 3)}
    FsPath(cfg.output_path + ".provenance.json").write_text(json.dumps(prov, indent=2) + "\n")


def _sink(cfg: ExperimentConfig, columns: Sequence[Column]) -> CsvSink:
    return CsvSink(cfg.output_path + ".csv" if cfg.output_path else None, columns)


# ---------------------------------------------------------------------------
# Experiments


def _variance_se(x: np.ndarray) -> float:
    n = len(x)
    c = x - x.mean()
    m2, m4 = np.mean(c**2), np.mean(c**4)
    return float(math.sqrt(max(m4 - m2 * m2 * (n - 3) / (n - 1), 0.0) / n))


def _riesz_samples(cfg: ExperimentConfig, hs: Sequence[float]) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """(Hamiltonians (paths, len(hs)), self-intersection times (paths,), path seeds)."""
    gamma = float(cfg.get("gamma"))
    steps = int(cfg.get("steps"))
    seeds = derive_seeds(int(cfg.get("seed")), int(cfg.get("paths")))
    c = riesz_constant_c_gamma(gamma)

    def one(seed: int):
        p = brownian.sample_path(1, steps, 1.0, seed)
        return (brownian.riesz_hamiltonian_sweep(p, hs, gamma, c_gamma=c),
                brownian.self_intersection_lt(p).value)

    out = map_items(one, seeds)
    return np.array([o[0] for o in out]), np.array([o[1] for o in out]), seeds


def _riesz_scaling(cfg: ExperimentConfig):
    hs = [float(h) for h in cfg.get("h_grid")]
    gamma = float(cfg.get("gamma"))
    vals, _, seeds = _riesz_samples(cfg, hs)
    sink = _sink(cfg, [Column("h", "length", "brownian"),
                       Column("variance", "time^2", "brownian.riesz_hamiltonian"),
                       Column("std_error", "time^2", "experiments"),
                       Column("mean", "time^2", "brownian.riesz_hamiltonian")])
    points = []
    for j, h in enumerate(hs):
        col = vals[:, j]
        v, se = float(np.var(col, ddof=1)), _variance_se(col)
        points.append((h, v, se))
        sink.add((h, v, se, float(col.mean())))
    sink.close()
    local = np.diff(np.log([p[1] for p in points])) / np.diff(np.log(hs))
    rep = ScalingReport.build(points, 7.0 - 4.0 * gamma, float(cfg.get("tolerance")),
                              {"local_slopes": local.tolist()})
    return rep, {"base": int(cfg.get("seed")), "paths": len(seeds)}


def _modulus_scaling(cfg: ExperimentConfig):
    m, s = int(cfg.get("m")), float(cfg.get("s"))
    hs = [float(h) for h in cfg.get("h_grid")]
    sink = _sink(cfg, [Column("h", "length", "variance"),
                       Column("A_h_over_log", "time^2m", "variance.A_h"),
                       Column("A_h", "time^2m", "variance.A_h")])
    points = []
    for h in hs:
        a = variance.A_h(m, h, s)
        y = a / math.log(1.0 / h)
        points.append((h, y, 0.0))
        sink.add((h, y, a))
    sink.close()
    return ScalingReport.build(points, 4.0, float(cfg.get("tolerance"))), {}


def _variance_table_1d(cfg: ExperimentConfig):
    s = float(cfg.get("s"))
    hs = [float(h) for h in cfg.get("h_grid")]
    sink = _sink(cfg, [Column("m", "-", "experiments"), Column("h", "length", "variance"),
                       Column("normalized", "-", "variance.A_h"),
                       Column("target", "-", "variance.sigma_sq_1d")])
    summary = {}
    for m in cfg.get("m_list"):
        m = int(m)
        target = variance.sigma_sq_1d(m).sigma_sq * s
        norm = []
        for h in hs:
            val = variance.ISOMETRY_CONSTANT / math.factorial(2 * m) * variance.A_h(m, h, s)
            val /= h**4 * math.log(1.0 / h)
            norm.append(val)
            sink.add((m, h, val, target))
        fit = variance.affine_fit_a(m, s)
        gaps = [abs(v - target) for v in norm]
        summary[f"m={m}"] = {
            "target": target,
            "from_affine_fit": variance.sigma_sq_1d_from_slope(m, fit.slope, s),
            "monotone_approach": all(b <= a for a, b in zip(gaps, gaps[1:])),
        }
    sink.close()
    return TableReport(tuple(c.name for c in sink.columns), tuple(sink.rows), summary), {}


def _variance_table_2d(cfg: ExperimentConfig):
    M = int(cfg.get("m_max"))
    sink = _sink(cfg, [Column("m", "-", "experiments"),
                       Column("sigma_sq", "-", "variance.sigma_sq_2d"),
                       Column("partial_sum", "-", "variance.partial_sums_2d")])
    total = 0.0
    for m in range(1, M + 1):
        v = float(variance.sigma_sq_2d(m).sigma_sq)
        total += v
        sink.add((m, v, total))
    sink.close()
    sums = [r[2] for r in sink.rows]
    summary = {"increasing": all(b > a for a, b in zip(sums, sums[1:])),
               "last_increment": sums[-1] - sums[-2] if len(sums) > 1 else float("nan")}
    return TableReport(tuple(c.name for c in sink.columns), tuple(sink.rows), summary), {}


def _appendix_sweep(cfg: ExperimentConfig):
    deltas = [float(d) for d in cfg.get("deltas")]
    ids = [str(i) for i in cfg.get("integrals")]
    n_mc, seed = int(cfg.get("n_mc")), int(cfg.get("seed"))
    sink = _sink(cfg, [Column("integral", "-", "simplex"), Column("delta", "-", "simplex"),
                       Column("status", "-", "simplex.convergence_verdict"),
                       Column("growth", "-", "simplex.convergence_verdict"),
                       Column("growth_se", "-", "simplex.convergence_verdict")])
    vectors = {}
    for iid in ids:
        codes = []
        for d in deltas:
            v = simplex.convergence_verdict(iid, d, n_mc=n_mc, seed=seed)
            sink.add((iid, d, v.status, v.fitted_growth, v.growth_stderr))
            codes.append({"converges": "C", "diverges": "D"}.get(v.status, "?"))
        vectors[iid] = "".join(codes)
    sink.close()
    return (TableReport(tuple(c.name for c in sink.columns), tuple(sink.rows),
                        {"verdicts": vectors}), {"base": seed})


def _moments_summary(z: np.ndarray) -> dict:
    return {"skewness": float(stats.skew(z)), "excess_kurtosis": float(stats.kurtosis(z))}


def mixture_diagnostic(cfg: ExperimentConfig) -> TableReport:
    """Regress squared normalized fluctuations on the self-intersection time.

    With ``null = 1`` the fluctuation is replaced by sqrt(alpha) times an
    independent standard normal, which must look Gaussian after studentizing.
    """
    return _run(cfg, _mixture)


def _mixture(cfg: ExperimentConfig):
    gamma, h = float(cfg.get("gamma")), float(cfg.get("h"))
    if int(cfg.get("paths")) < 2000:
        raise LabError("the mixture diagnostic needs at least 2000 paths")
    vals, alpha, seeds = _riesz_samples(cfg, [h])
    beta = 2.0 * gamma - 1.0
    fl = (vals[:, 0] - vals[:, 0].mean()) / h ** (2.5 - beta)
    if int(cfg.get("null")):
        rng = np.random.default_rng(derive_seeds(int(cfg.get("seed")) + 1, 1)[0])
        fl = np.sqrt(alpha) * rng.standard_normal(len(alpha))
    reg = stats.linregress(alpha, fl**2)
    sink = _sink(cfg, [Column("path_seed", "-", "parallel"),
                       Column("alpha", "time^2", "brownian.self_intersection_lt"),
                       Column("fluctuation", "-", "brownian.riesz_hamiltonian")])
    for s, a, f in zip(seeds, alpha, fl):
        sink.add((s, float(a), float(f)))
    sink.close()
    summary = {
        "slope": float(reg.slope),
        "slope_stderr": float(reg.stderr),
        "t_stat": float(reg.slope / reg.stderr) if reg.stderr > 0 else float("inf"),
        "intercept": float(reg.intercept),
        "studentized": _moments_summary(fl / np.sqrt(alpha)),
        "proportionality": float(np.mean(fl**2) / np.mean(alpha)),
    }
    return (TableReport(tuple(c.name for c in sink.columns), tuple(sink.rows), summary),
            {"base": int(cfg.get("seed")), "paths": len(seeds)})


_DISPATCH: dict[str, Callable] = {
    "riesz-scaling": _riesz_scaling,
    "modulus-scaling": _modulus_scaling,
    "variance-table-1d": _variance_table_1d,
    "variance-table-2d": _variance_table_2d,
    "appendix-sweep": _appendix_sweep,
    "mixture-diagnostic": _mixture,
}


def _run(cfg: ExperimentConfig, fn: Callable):
    start = time.perf_counter()
    try:
        report, seeds = fn(cfg)
    except (LabError, ArithmeticError, RuntimeError) as exc:
        raise ExperimentError(f"{cfg.experiment}: {exc}") from exc
    _write_reports(cfg, report, seeds, time.perf_counter() - start)
    return report


def run_experiment(cfg: ExperimentConfig):
    """Run one experiment, write its files (if ``output_path`` is set) and return the report."""
    return _run(cfg, _DISPATCH[cfg.experiment])


def report_text(report) -> str:
    """Short human-readable summary used by the CLI."""
    buf = io.StringIO()
    if isinstance(report, ScalingReport):
        for h, y, se in report.points:
            buf.write(f"h={h:<10g} stat={y:.6g} se={se:.3g}\n")
        lo, hi = report.slope_ci
        buf.write(f"slope={report.slope:.4f} ci=[{lo:.4f}, {hi:.4f}] target={report.target_slope:.4f}"
                  f" tolerance={report.tolerance} verdict={report.verdict}\n")
        for k, v in report.extra.items():
            buf.write(f"{k}: {v}\n")
    else:
        buf.write(",".join(report.columns) + "\n")
        for row in report.rows[:50]:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        if len(report.rows) > 50:
            buf.write(f"... {len(report.rows) - 50} more rows\n")
        buf.write(json.dumps(_jsonable(report.summary), indent=2, sort_keys=True) + "\n")
    return buf.getvalue()
