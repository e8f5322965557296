"""Command line entry point ``local-time-lab``."""

from __future__ import annotations

import argparse
import csv
import math
import sys
from typing import Sequence

import numpy as np

from . import brownian, chaos, riesz, simplex, variance
from .errors import ExperimentError, LabError, QuadratureError
from .experiments import ExperimentConfig, load_config, report_text, run_experiment
from .gaussian import heat_kernel_deriv
from .parallel import derive_seeds, map_items
from .quadrature import DEFAULT


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    return [int(v) for v in _floats(text)]


def _writer(out) -> "csv._writer":
    return csv.writer(out, lineterminator="\n")


def _nominal_err(v: float) -> float:
    return max(DEFAULT.abs_tol, DEFAULT.rel_tol * abs(v))


def cmd_run(args, out) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg = ExperimentConfig(cfg.experiment, cfg.parameters, args.output)
    report = run_experiment(cfg)
    out.write(report_text(report))
    return 0


def cmd_kernel_eval(args, out) -> int:
    w = _writer(out)
    w.writerow(["x", "value", "err_estimate"])
    fam = args.family
    for x in args.x:
        if fam == "g_h":
            spec = riesz.RieszSpec(args.beta, args.h)
            v = riesz.g_h_eval(spec, x)
            err = abs(v) * riesz.g_h_calibration(args.beta).max_rel_residual if args.beta < 1 else 0.0
        elif fam == "K":
            v = riesz.riesz_K(args.beta, args.t, x)
            err = _nominal_err(v)
        elif fam == "f_h":
            v, err = riesz.f_h_fourier(riesz.RieszSpec(args.beta, args.h), x), 0.0
        elif fam == "phi1d":
            v = chaos.phi_1d(args.m, args.h, 0.0, x, method="quad")
            err = abs(v - chaos.phi_1d(args.m, args.h, 0.0, x, method="closed"))
        elif fam == "phi2d":
            v = chaos.phi_2d(args.i, args.h2, x, 0.0)
            err = _nominal_err(v)
        elif fam == "contraction":
            est = chaos.contraction_ratio(args.m, args.r, x, n_mc=args.n_mc, seed=args.seed)
            v, err = est.estimate, est.stderr
        else:  # heat
            v, err = float(heat_kernel_deriv(args.n, args.t, x)), 0.0
        w.writerow([repr(float(x)), repr(float(v)), repr(float(err))])
    return 0


def cmd_variance_table(args, out) -> int:
    w = _writer(out)
    w.writerow(["m", "h", "raw_limit_estimate", "normalized", "sigma_sq_target", "rel_dev"])
    for m in args.m_list:
        if args.dim == 1:
            target = variance.sigma_sq_1d(m).sigma_sq * args.s
            for h in args.h_list:
                raw = variance.A_h(m, h, args.s)
                norm = variance.ISOMETRY_CONSTANT / math.factorial(2 * m) * raw / (h**4 * math.log(1 / h))
                w.writerow([m, repr(h), repr(raw), repr(norm), repr(target), repr(abs(norm / target - 1))])
        else:
            lim = variance.sigma_sq_2d(m)
            w.writerow([m, "limit", repr(float(lim.raw_limit)), repr(float(lim.sigma_sq)),
                        repr(float(lim.sigma_sq)), repr(0.0)])
    return 0


def cmd_appendix_check(args, out) -> int:
    v = simplex.convergence_verdict(args.integral, args.delta, n_mc=args.n_mc, seed=args.seed,
                                    decades=args.decades)
    w = _writer(out)
    w.writerow(["eps", "value", "stderr"])
    for (e, val), se in zip(v.evidence, v.stderr):
        w.writerow([repr(e), repr(val), repr(se)])
    out.write(f"# integral={v.integral_id} delta={v.delta} status={v.status} model={v.model}\n")
    out.write(f"# growth={v.fitted_growth:.6g} growth_stderr={v.growth_stderr:.3g}"
              f" log_slope={v.log_slope:.6g}\n")
    return 0


def cmd_simulate(args, out) -> int:
    seeds = derive_seeds(args.seed, args.paths)

    def one(seed: int) -> float:
        p = brownian.sample_path(1, args.steps, 1.0, seed)
        if args.functional == "H":
            return brownian.l2_modulus_H(p, args.h).value
        if args.functional == "riesz":
            return brownian.riesz_hamiltonian(p, args.h, args.gamma).value
        return brownian.self_intersection_lt(p, args.eps).value

    vals = np.array(map_items(one, seeds))
    w = _writer(out)
    w.writerow(["path_seed", "value"])
    for s, v in zip(seeds, vals):
        w.writerow([s, repr(float(v))])
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
    w.writerow(["summary_mean", repr(float(vals.mean()))])
    w.writerow(["summary_stderr", repr(se)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="local-time-lab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a key = value config file")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="output prefix, overrides the config")
    r.set_defaults(func=cmd_run)

    k = sub.add_parser("kernel-eval", help="evaluate a kernel on a list of points")
    k.add_argument("--family", required=True,
                   choices=["g_h", "K", "f_h", "phi1d", "phi2d", "contraction", "heat"])
    k.add_argument("--x", type=_floats, required=True,
                   help="points: x, xi (f_h), tau (phi1d, phi2d) or h (contraction)")
    k.add_argument("--beta", type=float, default=0.75)
    k.add_argument("--h", type=float, default=0.1)
    k.add_argument("--h2", type=_floats, default=[0.1, 0.0], help="2-d shift")
    k.add_argument("--t", type=float, default=1.0)
    k.add_argument("--m", type=int, default=1)
    k.add_argument("--n", type=int, default=0, help="derivative order for heat")
    k.add_argument("--i", type=_ints, default=[1, 1], help="index tuple for phi2d")
    k.add_argument("--r", type=int, default=2)
    k.add_argument("--n-mc", type=int, default=200_000)
    k.add_argument("--seed", type=int, default=0)
    k.set_defaults(func=cmd_kernel_eval)

    v = sub.add_parser("variance-table", help="limit variances of chaos projections")
    v.add_argument("--dim", type=int, choices=[1, 2], default=1)
    v.add_argument("--m-list", type=_ints, default=[1, 2])
    v.add_argument("--h-list", type=_floats, default=[1e-3, 1e-4, 1e-5, 1e-6])
    v.add_argument("--s", type=float, default=1.0)
    v.set_defaults(func=cmd_variance_table)

    a = sub.add_parser("appendix-check", help="convergence verdict for a singular integral")
    a.add_argument("--integral", choices=["sing1", "sing2", "sing3"], default="sing3")
    a.add_argument("--delta", type=float, required=True)
    a.add_argument("--n-mc", type=int, default=200_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--decades", type=int, default=12)
    a.set_defaults(func=cmd_appendix_check)

    s = sub.add_parser("simulate", help="per-path Brownian functionals")
    s.add_argument("--functional", choices=["H", "riesz", "alpha"], required=True)
    s.add_argument("--paths", type=int, default=100)
    s.add_argument("--steps", type=int, default=4096)
    s.add_argument("--h", type=float, default=0.1)
    s.add_argument("--gamma", type=float, default=0.8)
    s.add_argument("--eps", type=float, default=None, help="mollifier for alpha (default 4 dt)")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, sys.stdout)
    except (LabError, QuadratureError, ExperimentError, OSError) as exc:
        print(f"local-time-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
