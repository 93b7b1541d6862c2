"""Information criteria, parameter partitions and candidate ranking.

Four penalized criteria are computed from one fitted log-likelihood:

    BIC_N  = -2 loglik + p ln N        (N subjects)
    BIC_n  = -2 loglik + p ln n        (n observations)
    BIC_ne = -2 loglik + p ln n_e      (effective sample size)
    BIC_h  = -2 loglik + |theta_R| ln N + |theta_F| ln n

where theta_R collects the parameters tied to subject-level variation
(every free omega_k^2, plus the mean coefficients mu_k and alpha_k of a
component whose omega_k^2 is free) and theta_F the rest, always
including sigma2.  Smaller is better everywhere.
"""

from __future__ import annotations

import math
import warnings
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterable, Sequence

from .candidates import CandidateModel
from .ess import effective_sample_size
from .estimation import FittedModel

CRITERIA = ("N", "n", "ne", "h")

_JEFFREYS_BREAKS = (1.0, 10.0 ** 0.5, 10.0, 10.0 ** 1.5, 100.0)
_JEFFREYS_LABELS = (
    "Negative",
    "Barely worth mentioning",
    "Substantial",
    "Strong",
    "Very strong",
    "Decisive",
)

_DELTA_BREAKS = (2.0, 6.0, 10.0)
_DELTA_LABELS = (
    "Not worth more than a bare mention",
    "Positive",
    "Strong",
    "Very Strong",
)


def bic(loglik: float, p: int, sample_size: float) -> float:
    """-2 loglik + p ln(sample_size)."""
    if sample_size <= 0:
        raise ValueError("sample_size must be positive")
    return -2.0 * loglik + p * math.log(sample_size)


@dataclass(frozen=True)
class ParameterPartition:
    """Free-parameter labels split into subject-level and population-level."""

    random: tuple[str, ...]
    fixed: tuple[str, ...]

    @property
    def n_random(self) -> int:
        return len(self.random)

    @property
    def n_fixed(self) -> int:
        return len(self.fixed)


def partition_parameters(candidate: CandidateModel) -> ParameterPartition:
    """Split a candidate's free parameters into theta_R and theta_F.

    mu_k belongs to theta_R when omega_k^2 is free; alpha_k belongs to
    theta_R when both alpha_k and omega_k^2 are free; every free
    omega_k^2 is in theta_R.  sigma2 and the remaining mean
    coefficients make up theta_F, sigma2 listed first.
    """
    random_flags = {
        "mu0": True,
        "mu1": candidate.omega1_free,
        "mu2": candidate.omega2_free,
        "alpha1": candidate.alpha1_free and candidate.omega1_free,
        "alpha2": candidate.alpha2_free and candidate.omega2_free,
    }
    mean = candidate.mean_labels()
    random = tuple(lbl for lbl in mean if random_flags[lbl]) + candidate.variance_labels()
    fixed = ("sigma2",) + tuple(lbl for lbl in mean if not random_flags[lbl])
    return ParameterPartition(random=random, fixed=fixed)


def bic_h(loglik: float, partition: ParameterPartition, n_subjects: int, n_obs: int) -> float:
    """Hybrid criterion: subject-level parameters pay ln N, the rest ln n."""
    if n_subjects <= 0 or n_obs <= 0:
        raise ValueError("sample sizes must be positive")
    return (
        -2.0 * loglik
        + partition.n_random * math.log(n_subjects)
        + partition.n_fixed * math.log(n_obs)
    )


def bayes_factor_from_bics(bic_1: float, bic_2: float) -> float:
    """Approximate Bayes factor of model 1 over model 2, exp(-(bic_1 - bic_2)/2).

    Saturates to inf with a warning when the difference is too large
    for a float.
    """
    if not (math.isfinite(bic_1) and math.isfinite(bic_2)):
        raise ValueError("criterion values must be finite")
    try:
        return math.exp(-0.5 * (bic_1 - bic_2))
    except OverflowError:
        warnings.warn("Bayes factor overflows a float; reporting inf", RuntimeWarning)
        return math.inf


def jeffreys_label(bayes_factor: float) -> str:
    """Evidence grade for a Bayes factor; intervals are closed on the left."""
    if not bayes_factor > 0:
        raise ValueError("a Bayes factor must be positive")
    return _JEFFREYS_LABELS[bisect_right(_JEFFREYS_BREAKS, bayes_factor)]


def delta_bic_label(delta: float) -> str:
    """Evidence grade for a non-negative criterion difference."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return _DELTA_LABELS[bisect_right(_DELTA_BREAKS, delta)]


@dataclass(frozen=True, eq=False)
class BicReport:
    """All four criterion values for one fitted candidate."""

    candidate_id: str
    loglik: float
    p: int
    n_obs: int
    n_subjects: int
    n_effective: float
    bic_N: float
    bic_n: float
    bic_ne: float
    bic_h: float
    partition: ParameterPartition


def build_report(fit: FittedModel) -> BicReport:
    """Evaluate every criterion for one fit (computes n_e on the way)."""
    part = partition_parameters(fit.candidate)
    p = fit.candidate.n_parameters
    n_e = effective_sample_size(fit)
    return BicReport(
        candidate_id=fit.candidate.id,
        loglik=fit.loglik,
        p=p,
        n_obs=fit.n_obs,
        n_subjects=fit.n_subjects,
        n_effective=n_e,
        bic_N=bic(fit.loglik, p, fit.n_subjects),
        bic_n=bic(fit.loglik, p, fit.n_obs),
        bic_ne=bic(fit.loglik, p, n_e),
        bic_h=bic_h(fit.loglik, part, fit.n_subjects, fit.n_obs),
        partition=part,
    )


def criterion_value(report: BicReport, criterion: str) -> float:
    try:
        return {
            "N": report.bic_N,
            "n": report.bic_n,
            "ne": report.bic_ne,
            "h": report.bic_h,
        }[criterion]
    except KeyError:
        raise ValueError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}") from None


def _ranked(reports: Sequence[BicReport], criterion: str) -> list[BicReport]:
    def key(r: BicReport):
        return (
            criterion_value(r, criterion),
            r.p,
            CandidateModel.from_id(r.candidate_id).enumeration_index,
        )

    return sorted(reports, key=key)


def select_model(reports: Sequence[BicReport], criterion: str) -> str:
    """Candidate id with the smallest value of one criterion.

    Exact ties go to the candidate with fewer parameters, then to the
    earlier one in enumeration order.
    """
    if not reports:
        raise ValueError("no reports to select from")
    return _ranked(reports, criterion)[0].candidate_id


def report_to_dict(report: BicReport) -> dict:
    return {
        "candidate": report.candidate_id,
        "loglik": report.loglik,
        "p": report.p,
        "n": report.n_obs,
        "N": report.n_subjects,
        "n_e": report.n_effective,
        "bic_N": report.bic_N,
        "bic_n": report.bic_n,
        "bic_ne": report.bic_ne,
        "bic_h": report.bic_h,
        "theta_R": list(report.partition.random),
        "theta_F": list(report.partition.fixed),
    }


def selection_summary(
    reports: Sequence[BicReport],
    criteria: Iterable[str] = CRITERIA,
) -> dict:
    """Ranking summary across candidates, one winner per criterion.

    For each criterion the two best candidates are compared by
    criterion difference and the matching approximate Bayes factor,
    each with its evidence grade.
    """
    if not reports:
        raise ValueError("no reports to summarize")
    criteria = list(criteria)
    for crit in criteria:
        criterion_value(reports[0], crit)  # validate names early
    winners: dict[str, str] = {}
    evidence: dict[str, dict] = {}
    for crit in criteria:
        ranked = _ranked(reports, crit)
        winners[crit] = ranked[0].candidate_id
        if len(ranked) > 1:
            best, runner = ranked[0], ranked[1]
            delta = criterion_value(runner, crit) - criterion_value(best, crit)
            bf = bayes_factor_from_bics(
                criterion_value(best, crit), criterion_value(runner, crit)
            )
            evidence[crit] = {
                "best": best.candidate_id,
                "runner_up": runner.candidate_id,
                "delta": delta,
                "delta_label": delta_bic_label(delta),
                "bayes_factor": bf,
                "jeffreys_label": jeffreys_label(bf),
            }
    return {
        "n": reports[0].n_obs,
        "N": reports[0].n_subjects,
        "criteria": criteria,
        "candidates": [report_to_dict(r) for r in reports],
        "winners": winners,
        "evidence": evidence,
    }
