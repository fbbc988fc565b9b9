"""Command-line interface: simulate, fit, enumerate, check-equiv, summary.

Exit codes: 0 success (or equivalent), 1 I/O failure, 2 invalid input,
3 negative result (no converged fit, not equivalent), 4 order above the cap.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io
from .enumerator import enumerate_representations
from .equivalence import DEFAULT_TOL, DimensionMismatchError, check_equivalent, mu1
from .fitter import FitOptions, distinct_modes, fit_mle, select_order
from .model import (
    CoxianError,
    OrderTooLargeError,
    exit_probabilities,
    moments,
    params_from_generator,
)
from .sampler import DEFAULT_CHUNK, sample_dataset

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_NEGATIVE = 3
EXIT_CAPACITY = 4


class UsageError(Exception):
    pass


def _floats(arr):
    return [float(v) for v in np.asarray(arr).reshape(-1)]


def _emit(args, doc, header=None, rows=None):
    if args.format == "json" or rows is None:
        print(json.dumps(doc, indent=2))
    elif args.format == "csv":
        print(io.format_csv(header, rows))
    else:
        print(io.format_table(header, rows))


def cmd_simulate(args) -> int:
    if args.n_obs < 1:
        raise UsageError(f"--n-obs must be >= 1, got {args.n_obs}")
    Q = io.read_model(args.model)
    p = params_from_generator(Q)
    seed = 0 if args.seed is None else args.seed
    data = sample_dataset(p, args.n_obs, seed, chunk_size=args.chunk_size, n_jobs=args.jobs)
    io.write_durations(args.out, data)
    stats = {
        "n_obs": int(data.size),
        "seed": seed,
        "mean": float(np.mean(data)),
        "sd": float(np.std(data, ddof=1)) if data.size > 1 else 0.0,
        "theoretical_mean": float(moments(Q, 1)[0]),
        "out": str(args.out),
    }
    header = ["n_obs", "mean", "sd", "theoretical_mean"]
    _emit(args, stats, header, [[str(stats["n_obs"]), stats["mean"], stats["sd"], stats["theoretical_mean"]]])
    return EXIT_OK


def _fit_doc(r):
    se = r.standard_errors
    return {
        "model": io.model_document(r.params),
        "loglik": float(r.loglik),
        "aic": float(r.aic),
        "converged": bool(r.converged),
        "n_iterations": int(r.n_iterations),
        "start_index": int(r.start_index),
        "standard_errors": None if se is None else _floats(se),
        "los": _floats(r.params.los()),
    }


def _fit_rows(results):
    rows = []
    for r in results:
        se = r.standard_errors
        for k, v in enumerate(r.params.theta):
            rows.append([str(r.start_index), r.loglik, "lambda" if k < r.n - 1 else "mu",
                         str(k + 1 if k < r.n - 1 else k - r.n + 2), v, None if se is None else se[k]])
    return ["start", "loglik", "rate", "phase", "estimate", "se"], rows


def cmd_fit(args) -> int:
    data = io.read_durations(args.data)
    opts = FitOptions(
        n_starts=args.starts,
        seed=0 if args.seed is None else args.seed,
        n_jobs=args.jobs,
        standard_errors=not args.no_se,
    )
    if args.order_select:
        best_n, table = select_order(data, args.order_select, opts)
        if best_n is None:
            print("no start converged for any order", file=sys.stderr)
            return EXIT_NEGATIVE
        doc = {
            "selected_order": int(best_n),
            "fits": {str(n): (None if r is None else _fit_doc(r)) for n, r in table.items()},
        }
        rows = [[str(n), "-" if r is None else r.loglik, "-" if r is None else r.aic] for n, r in table.items()]
        _emit(args, doc, ["n", "loglik", "aic"], rows)
        return EXIT_OK
    if args.phases < 1:
        raise UsageError(f"--phases must be >= 1, got {args.phases}")
    modes = distinct_modes(fit_mle(data, args.phases, opts))
    if modes and not args.all_modes:
        modes = [m for m in modes if modes[0].loglik - m.loglik <= args.mode_gap]
    if not modes:
        print("no start converged", file=sys.stderr)
        return EXIT_NEGATIVE
    header, rows = _fit_rows(modes)
    _emit(args, [_fit_doc(r) for r in modes], header, rows)
    return EXIT_OK


def cmd_enumerate(args) -> int:
    Q = io.read_model(args.model)
    rs = enumerate_representations(Q, tol=args.tol, n_jobs=args.jobs)
    n = Q.n
    docs, rows = [], []
    for g, r in zip(rs.generators, rs.perm_indices):
        p = params_from_generator(g)
        docs.append(io.model_document(p, {"perm_index": r, "diag": _floats(g.diag)}))
        rows.append([str(r), *g.diag, *g.superdiag, *(-1.0 / g.diag)])
    header = (
        ["r"]
        + [f"V{i + 1}" for i in range(n)]
        + [f"b{i + 1}{i + 2}" for i in range(n - 1)]
        + [f"LoS{i + 1}" for i in range(n)]
    )
    for note in rs.notes:
        print(f"note: {note}", file=sys.stderr)
    _emit(args, docs, header, rows)
    return EXIT_OK


def cmd_check_equiv(args) -> int:
    Qa = io.read_model(args.model_a)
    Qb = io.read_model(args.model_b)
    rep = check_equivalent(Qa, Qb, tol=args.tol)
    doc = {
        "equivalent": bool(rep.equivalent),
        "m": None if rep.m is None else [_floats(row) for row in rep.m.m],
        "max_residual": float(rep.max_residual),
        "mu1_gap": float(rep.mu1_gap),
        "moment_gaps": _floats(rep.moment_gaps),
        "row_sum_gap": float(rep.row_sum_gap),
        "absorb_gap": float(rep.absorb_gap),
        "spectrum_gap": float(rep.spectrum_gap),
        "reasons": list(rep.reasons),
    }
    rows = [[k, doc[k]] for k in ("max_residual", "mu1_gap", "row_sum_gap", "absorb_gap", "spectrum_gap")]
    rows.insert(0, ["equivalent", str(rep.equivalent).lower()])
    _emit(args, doc, ["quantity", "value"], rows)
    return EXIT_OK if rep.equivalent else EXIT_NEGATIVE


def cmd_summary(args) -> int:
    if args.moments < 1:
        raise UsageError(f"--moments must be >= 1, got {args.moments}")
    Q = io.read_model(args.model)
    p = params_from_generator(Q)
    doc = {
        "n": p.n,
        "los": _floats(-1.0 / Q.diag),
        "exit_probs": _floats(exit_probabilities(p)),
        "moments": _floats(moments(Q, args.moments)),
        "mu1": float(mu1(Q)),
    }
    rows = [[f"phase {k + 1}", doc["los"][k], doc["exit_probs"][k]] for k in range(p.n)]
    rows += [[f"E[T^{r + 1}]", m, "-"] for r, m in enumerate(doc["moments"])]
    rows.append(["mu1", doc["mu1"], "-"])
    _emit(args, doc, ["quantity", "los / value", "exit_prob"], rows)
    return EXIT_OK


def _common(parser, suppress: bool):
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(None), help="random seed")
    parser.add_argument("--format", choices=("json", "table", "csv"), default=default("json"))
    parser.add_argument("--tol", type=float, default=default(DEFAULT_TOL), help="equivalence tolerance")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coxian", description="Coxian phase-type models")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw absorption times from a model")
    p.add_argument("model")
    p.add_argument("--n-obs", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="maximum-likelihood fit from several starts")
    p.add_argument("data")
    p.add_argument("--phases", "-n", type=int, default=1)
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--order-select", type=int, metavar="N_MAX", help="pick the order in 1..N_MAX by AIC")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-se", action="store_true", help="skip standard errors")
    p.add_argument("--mode-gap", type=float, default=0.01,
                   help="report modes within this log-likelihood of the best (default 0.01)")
    p.add_argument("--all-modes", action="store_true", help="report every converged mode")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("enumerate", help="list every equivalent representation")
    p.add_argument("model")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("check-equiv", help="test two models for equivalence")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.set_defaults(func=cmd_check_equiv)

    p = sub.add_parser("summary", help="lengths of stay, exit probabilities and moments")
    p.add_argument("model")
    p.add_argument("--moments", "-m", type=int, default=3)
    p.set_defaults(func=cmd_summary)

    for action in sub.choices.values():
        _common(action, suppress=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OrderTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (CoxianError, DimensionMismatchError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
