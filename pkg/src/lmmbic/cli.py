"""Command-line interface.

Subcommands: fit one candidate, select across all sixteen, report the
effective sample size of one fit, or run the Monte-Carlo study.
Results go to stdout (or --out) as JSON, except simulate, which writes
its three report files into a directory.  Log lines go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .candidates import CandidateModel, enumerate_candidates
from .criteria import CRITERIA, build_report, selection_summary
from .data import DataFormatError, read_dataset
from .ess import effective_sample_size
from .estimation import FitOptions, UnidentifiableModelError, fit_ml
from .model import correlation_from_covariance
from .report import emit_report
from .simulation import DESIGNS, StudyConfig, run_study

logger = logging.getLogger("lmmbic")


def _candidate_id(text: str) -> CandidateModel:
    try:
        return CandidateModel.from_id(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _criteria_list(text: str) -> list[str]:
    keys = [k.strip() for k in text.split(",") if k.strip()]
    unknown = [k for k in keys if k not in CRITERIA]
    if unknown or not keys:
        raise argparse.ArgumentTypeError(
            f"criteria must be a comma-separated subset of {','.join(CRITERIA)}"
        )
    return keys


def _design_list(text: str) -> list[str]:
    labels = [d.strip() for d in text.split(",") if d.strip()]
    unknown = [d for d in labels if d not in DESIGNS]
    if unknown or not labels:
        raise argparse.ArgumentTypeError(
            f"designs must be a comma-separated subset of {','.join(sorted(DESIGNS))}"
        )
    return labels


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _add_fit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--restarts", type=_positive_int, default=3,
                        help="multistart count for the variance search (default 3)")
    parser.add_argument("--max-iterations", type=_positive_int, default=2000,
                        help="simplex iteration cap per start (default 2000)")
    parser.add_argument("--rel-tolerance", type=float, default=1e-8,
                        help="relative convergence tolerance (default 1e-8)")
    parser.add_argument("--variance-floor", type=float, default=1e-12,
                        help="lower clamp for variance estimates (default 1e-12)")
    parser.add_argument("--seed", type=_non_negative_int, default=0,
                        help="seed for every random draw (default 0)")


def _fit_options(args: argparse.Namespace) -> FitOptions:
    return FitOptions(
        max_iterations=args.max_iterations,
        rel_tolerance=args.rel_tolerance,
        n_restarts=args.restarts,
        variance_floor=args.variance_floor,
        seed=args.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmmbic",
        description="Model selection for linear mixed-effects models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more log output on stderr (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one candidate by maximum likelihood")
    p_fit.add_argument("data", help="delimited file with columns subject,x,c,y")
    p_fit.add_argument("--candidate", type=_candidate_id, required=True,
                       help="candidate id such as O2M1")
    p_fit.add_argument("--out", help="write JSON here instead of stdout")
    _add_fit_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit)

    p_select = sub.add_parser("select", help="rank all sixteen candidates")
    p_select.add_argument("data", help="delimited file with columns subject,x,c,y")
    p_select.add_argument("--criteria", type=_criteria_list, default=list(CRITERIA),
                          help="comma-separated subset of N,n,ne,h (default: all)")
    p_select.add_argument("--out", help="write JSON here instead of stdout")
    _add_fit_flags(p_select)
    p_select.set_defaults(func=cmd_select)

    p_ess = sub.add_parser("ess", help="effective sample size under one fitted candidate")
    p_ess.add_argument("data", help="delimited file with columns subject,x,c,y")
    p_ess.add_argument("--candidate", type=_candidate_id, required=True,
                       help="candidate id such as O1M1")
    p_ess.add_argument("--out", help="write JSON here instead of stdout")
    _add_fit_flags(p_ess)
    p_ess.set_defaults(func=cmd_ess)

    p_sim = sub.add_parser("simulate", help="run the Monte-Carlo selection study")
    p_sim.add_argument("--design", type=_design_list, default=list(DESIGNS),
                       help="comma-separated subset of a,b,c,d (default: all)")
    p_sim.add_argument("--replicates", type=_positive_int, default=25,
                       help="replicates per (design, truth) cell (default 25)")
    p_sim.add_argument("--out", default=".",
                       help="directory for results.csv, summary.csv, figure.svg (default .)")
    p_sim.add_argument("--threads", type=_positive_int, default=None,
                       help="worker processes (default: LMMBIC_THREADS or the CPU count)")
    _add_fit_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=False)
    if out:
        Path(out).write_text(text + "\n")
        logger.info("wrote %s", out)
    else:
        print(text)


def _block_summaries(fit) -> list[dict]:
    summaries = []
    for design, V in zip(fit.designs, fit.covariance_blocks()):
        R = correlation_from_covariance(V)
        off = R[~np.eye(R.shape[0], dtype=bool)]
        summaries.append(
            {
                "n_obs": int(V.shape[0]),
                "variance_mean": float(np.diagonal(V).mean()),
                "correlation_mean": float(off.mean()) if off.size else 0.0,
            }
        )
    return summaries


def cmd_fit(args: argparse.Namespace) -> int:
    data = read_dataset(args.data)
    fit = fit_ml(args.candidate, data, _fit_options(args))
    labels = (
        fit.candidate.mean_labels()
        + fit.candidate.variance_labels()
        + ("sigma2",)
    )
    values = list(fit.theta_hat.beta) + list(fit.theta_hat.omega2) + [fit.theta_hat.sigma2]
    payload = {
        "candidate": fit.candidate.id,
        "converged": fit.converged,
        "loglik": fit.loglik,
        "n": fit.n_obs,
        "N": fit.n_subjects,
        "estimates": {label: float(v) for label, v in zip(labels, values)},
        "boundary": list(fit.boundary),
        "blocks": _block_summaries(fit),
    }
    _emit_json(payload, args.out)
    return 0


def cmd_select(args: argparse.Namespace) -> int:
    data = read_dataset(args.data)
    options = _fit_options(args)
    reports = []
    for cand in enumerate_candidates():
        try:
            fit = fit_ml(cand, data, options)
        except (UnidentifiableModelError, np.linalg.LinAlgError) as exc:
            logger.warning("candidate %s failed to fit: %s", cand.id, exc)
            continue
        if not fit.converged:
            logger.warning("candidate %s did not converge; excluded", cand.id)
            continue
        reports.append(build_report(fit))
    if not reports:
        raise UnidentifiableModelError("no candidate could be fitted on this data")
    payload = selection_summary(reports, args.criteria)
    _emit_json(payload, args.out)
    return 0


def cmd_ess(args: argparse.Namespace) -> int:
    data = read_dataset(args.data)
    fit = fit_ml(args.candidate, data, _fit_options(args))
    payload = {
        "candidate": fit.candidate.id,
        "n": fit.n_obs,
        "N": fit.n_subjects,
        "n_e": effective_sample_size(fit),
    }
    _emit_json(payload, args.out)
    return 0


def _thread_count(args: argparse.Namespace) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("LMMBIC_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ValueError(f"LMMBIC_THREADS must be an integer, got {env!r}") from None
        if value < 1:
            raise ValueError("LMMBIC_THREADS must be at least 1")
        return value
    return os.cpu_count() or 1


def cmd_simulate(args: argparse.Namespace) -> int:
    config = StudyConfig(
        designs=tuple(args.design),
        replicates=args.replicates,
        seed=args.seed,
        fit_options=_fit_options(args),
    )
    workers = _thread_count(args)
    logger.info(
        "running %d designs x 16 truths x %d replicates on %d worker(s)",
        len(config.designs), config.replicates, workers,
    )
    table = run_study(config, n_workers=workers)
    paths = emit_report(table, args.out)
    logger.info("non-convergence rate: %.4f", table.nonconvergence_rate)
    logger.info("dropped replicates: %d", table.invalid_replicates)
    for path in paths:
        logger.info("wrote %s", path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(
        stream=sys.stderr, level=level, format="%(levelname)s %(message)s", force=True
    )
    try:
        return args.func(args)
    except (DataFormatError, UnidentifiableModelError, np.linalg.LinAlgError) as exc:
        logger.error("%s", exc)
        return 1
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
