"""Command-line front end.

Fit mode::

    oakeshmm --data panel.csv --states 2 --out report.json [--bootstrap 200]

Simulation mode (writes a CSV fixture)::

    oakeshmm --simulate --params truth.json --n 200 --T 5 --seed 1 --out panel.csv

Exit codes: 0 success, 2 usage error, 3 data ingestion error, 4 EM did not
converge, 5 observed information rank deficient, 6 other model failure.  The
report is written for codes 4 and 5 as well.
"""
import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bootstrap import bootstrap_se, simulate
from .data import read_csv, write_csv
from .em import FitOptions, fit
from .errors import HMMError, IngestError, InputError
from .information import observed_information
from .params import ProbParams, n_free_params, probs_to_logits, theta_labels

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INGEST = 3
EXIT_NOT_CONVERGED = 4
EXIT_RANK_DEFICIENT = 5
EXIT_MODEL = 6

REPORT_FORMAT = "oakeshmm-report/1"
SIG_DIGITS = 10

log = logging.getLogger("oakeshmm")


@dataclass
class RunConfig:
    data: str
    k: int
    max_iter: int = 5000
    tol: float = 1e-10
    n_starts: int = 10
    seed: int = 1
    bootstrap: int = 0
    categories: int = None
    one_based: bool = False
    out: str = None
    fmt: str = "json"

    def validate(self):
        if self.k < 1:
            raise InputError("--states must be >= 1")
        if not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.bootstrap < 0 or self.bootstrap == 1:
            raise InputError("--bootstrap must be 0 (off) or >= 2")
        if self.max_iter < 1 or self.n_starts < 1:
            raise InputError("--max-iter and --starts must be positive")


def _num(x):
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}") + 0.0


def _arr(a):
    if a is None:
        return None
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        return _num(a)
    return [_arr(v) for v in a]


def build_report(cfg, d, res, info, boot):
    p = res.params
    k, c = p.k, p.c
    s = n_free_params(k, c)
    theta = probs_to_logits(p).theta if p.is_interior() else None
    report = {
        "format": REPORT_FORMAT,
        "version": __version__,
        "data": {"path": cfg.data, "n": d.n, "T": d.T, "c": c, "n_configs": d.n_configs},
        "model": {"k": k, "s": s, "theta_labels": theta_labels(k, c)},
        "fit": {
            "loglik": _num(res.loglik),
            "iterations": res.n_iter,
            "converged": res.converged,
            "best_start": res.best_start,
            "seed": res.seed,
            "n_starts": cfg.n_starts,
            "max_iter": cfg.max_iter,
            "tol": cfg.tol,
            "start_logliks": _arr(res.start_logliks),
        },
        "estimates": {
            "initial": _arr(p.initial),
            "transition": _arr(p.transition),
            "response": _arr(p.response),
            "theta": _arr(theta),
        },
        "information": {
            "s": s,
            "rank": info.rank,
            "identifiable": info.identifiable,
            "singular_values": _arr(info.singular_values),
            "max_abs_score": _num(np.max(np.abs(info.score))) if s else 0.0,
            "null_parameter": info.null_parameter,
            "null_direction": _arr(info.null_direction),
        },
        "standard_errors": None,
        "bootstrap": None,
        "display_order": [int(u) for u in display_order(p)],
    }
    if info.identifiable:
        report["standard_errors"] = {
            "theta": _arr(info.se_theta),
            "initial": _arr(info.se_initial),
            "transition": _arr(info.se_transition),
            "response": _arr(info.se_response),
        }
    if boot is not None:
        report["bootstrap"] = {
            "B": boot.B,
            "failed": boot.n_failed,
            "seed": boot.seed,
            "initial": _arr(boot.se_initial),
            "transition": _arr(boot.se_transition),
            "response": _arr(boot.se_response),
            "theta": _arr(boot.se_theta),
        }
    return report


def display_order(p):
    """States by decreasing initial probability, stable on ties."""
    return np.argsort(-p.initial, kind="stable")


def dump_report(report):
    return json.dumps(report, indent=2) + "\n"


def _fmt(x, width=9):
    return f"{x:{width}.4f}" if x is not None else " " * (width - 1) + "-"


def format_table(report):
    """Human-readable tables with states in display order."""
    order = report["display_order"]
    est = report["estimates"]
    se = report["standard_errors"]
    boot = report["bootstrap"]
    k, c = report["model"]["k"], report["data"]["c"]
    lines = []
    info = report["information"]
    fitd = report["fit"]
    lines.append(
        f"n={report['data']['n']}  T={report['data']['T']}  c={c}  k={k}  "
        f"loglik={fitd['loglik']:.4f}  iterations={fitd['iterations']}  converged={fitd['converged']}"
    )
    lines.append(f"s={info['s']}  rank={info['rank']}  identifiable={info['identifiable']}")
    if not info["identifiable"]:
        lines.append(f"null direction dominated by {info['null_parameter']}; standard errors not available")
    lines.append("(states listed by decreasing initial probability; labels refer to the raw estimates)")

    def block(title, rows, cols):
        head = f"{title:<22}" + "".join(f"{col:>9}" for col in cols)
        lines.append("")
        lines.append(head)
        for r in rows:
            lines.append(f"{r[0]:<22}" + "".join(_fmt(v) for v in r[1:]))

    def cols_for(name):
        return [f"{name}{u + 1}" for u in order]

    rows = []
    for y in range(c):
        rows.append([f"y={y} est"] + [est["response"][y][u] for u in order])
        if se:
            rows.append([f"y={y} s.e."] + [se["response"][y][u] for u in order])
        if boot:
            rows.append([f"y={y} boot.s.e."] + [boot["response"][y][u] for u in order])
    block("response y|u", rows, cols_for("u="))
    rows = [["est"] + [est["initial"][u] for u in order]]
    if se:
        rows.append(["s.e."] + [se["initial"][u] for u in order])
    if boot:
        rows.append(["boot.s.e."] + [boot["initial"][u] for u in order])
    block("initial u", rows, cols_for("u="))
    rows = []
    for i in order:
        rows.append([f"from {i + 1} est"] + [est["transition"][i][u] for u in order])
        if se:
            rows.append([f"from {i + 1} s.e."] + [se["transition"][i][u] for u in order])
        if boot:
            rows.append([f"from {i + 1} boot.s.e."] + [boot["transition"][i][u] for u in order])
    block("transition", rows, cols_for("to "))
    return "\n".join(lines) + "\n"


def run_fit(cfg, stdout=None):
    """Fit, compute the information and optional bootstrap; write the report.

    Returns the exit code.
    """
    stdout = stdout or sys.stdout
    cfg.validate()
    try:
        d = read_csv(cfg.data, one_based=cfg.one_based, categories=cfg.categories)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    if cfg.k == 1:
        warnings.warn("k=1 is an independence model with no latent dynamics", stacklevel=2)
    opts = FitOptions(max_iter=cfg.max_iter, tol=cfg.tol, n_starts=cfg.n_starts, seed=cfg.seed)
    try:
        res = fit(d, cfg.k, opts)
        info = observed_information(d, res.params)
        boot = None
        if cfg.bootstrap:
            boot = bootstrap_se(res.params, d.n, d.T, cfg.k, cfg.bootstrap, cfg.seed, opts)
    except HMMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    report = build_report(cfg, d, res, info, boot)
    text = dump_report(report) if cfg.fmt == "json" else format_table(report)
    if cfg.out:
        with open(cfg.out, "w", newline="\n") as fh:
            fh.write(text)
    stdout.write(format_table(report))
    if not res.converged:
        print(f"warning: EM stopped after {res.n_iter} iterations without converging", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    if not info.identifiable:
        print(
            f"warning: observed information has rank {info.rank} < s = {info.n_params}; "
            "model not locally identifiable at the estimate",
            file=sys.stderr,
        )
        return EXIT_RANK_DEFICIENT
    return EXIT_OK


def run_simulate(params_path, n, T, seed, out, one_based=False, stdout=None):
    try:
        with open(params_path) as fh:
            p = ProbParams.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, InputError) as exc:
        print(f"error: cannot load parameters from {params_path}: {exc}", file=sys.stderr)
        return EXIT_INGEST
    d = simulate(p, n, T, seed)
    if out:
        write_csv(d, out, one_based=one_based)
    else:
        write_csv(d, stdout or sys.stdout, one_based=one_based)
    return EXIT_OK


def make_parser():
    ap = argparse.ArgumentParser(
        prog="oakeshmm",
        description="Fit a categorical hidden Markov model by EM and report exact observed-information standard errors.",
    )
    ap.add_argument("--data", metavar="PATH", help="wide CSV, one unit per row, one integer code per occasion")
    ap.add_argument("--states", type=int, metavar="K", help="number of latent states")
    ap.add_argument("--max-iter", type=int, default=5000)
    ap.add_argument("--tol", type=float, default=1e-10, help="relative log-likelihood change for convergence")
    ap.add_argument("--starts", type=int, default=10, help="number of EM starts")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--bootstrap", type=int, default=0, metavar="B", help="parametric bootstrap replicates (0 = off)")
    ap.add_argument("--categories", type=int, metavar="C", help="number of categories (default: 1 + max code)")
    ap.add_argument("--one-based", action="store_true", help="codes run 1..c instead of 0..c-1")
    ap.add_argument("--out", metavar="PATH", help="report file (fit mode) or CSV (simulate mode)")
    ap.add_argument("--format", dest="fmt", choices=("json", "text"), default="json", help="report file format")
    ap.add_argument("--simulate", action="store_true", help="simulate a dataset instead of fitting")
    ap.add_argument("--params", metavar="PATH", help="JSON with initial, transition, response (simulate mode)")
    ap.add_argument("--n", type=int, help="number of units (simulate mode)")
    ap.add_argument("--T", type=int, help="number of occasions (simulate mode)")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def main(argv=None):
    ap = make_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.simulate:
        if args.params is None or args.n is None or args.T is None:
            ap.error("--simulate needs --params, --n and --T")
        if args.n < 1 or args.T < 1:
            ap.error("--n and --T must be positive")
        return run_simulate(args.params, args.n, args.T, args.seed, args.out, args.one_based)
    if args.data is None or args.states is None:
        ap.error("fit mode needs --data and --states")
    cfg = RunConfig(
        data=args.data,
        k=args.states,
        max_iter=args.max_iter,
        tol=args.tol,
        n_starts=args.starts,
        seed=args.seed,
        bootstrap=args.bootstrap,
        categories=args.categories,
        one_based=args.one_based,
        out=args.out,
        fmt=args.fmt,
    )
    try:
        cfg.validate()
    except InputError as exc:
        ap.error(str(exc))
    return run_fit(cfg)


if __name__ == "__main__":
    sys.exit(main())
