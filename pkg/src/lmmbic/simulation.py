"""Monte-Carlo study of selection accuracy across generating structures.

Every candidate takes a turn as the generating truth.  For each
(design, truth) cell the study draws fresh generating parameters per
replicate, simulates a dataset, fits all sixteen candidates, lets each
criterion pick a winner, and counts exact structure recoveries.

Randomness is split into Philox substreams keyed by
(seed, design, truth, replicate), so results do not depend on the
execution schedule and the study parallelizes over replicates with
bit-identical output for any worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateModel, TrueParameters, enumerate_candidates, generate_dataset
from .criteria import CRITERIA, build_report, select_model
from .estimation import FitOptions, UnidentifiableModelError, fit_ml
from .rng import substream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationDesign:
    """A study cell size: N subjects, each observed n_per_subject times."""

    label: str
    n_subjects: int
    n_per_subject: int


DESIGNS = {
    "a": SimulationDesign("a", 20, 5),
    "b": SimulationDesign("b", 20, 100),
    "c": SimulationDesign("c", 100, 5),
    "d": SimulationDesign("d", 100, 100),
}


@dataclass(frozen=True)
class StudyConfig:
    """What to run: which designs, how many replicates per (design,
    truth) cell, the master seed, and the fit options applied to every
    candidate fit."""

    designs: tuple[str, ...] = ("a", "b", "c", "d")
    replicates: int = 100
    seed: int = 0
    fit_options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self) -> None:
        object.__setattr__(self, "designs", tuple(self.designs))
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        unknown = [d for d in self.designs if d not in DESIGNS]
        if unknown:
            raise ValueError(f"unknown design labels {unknown}; available: {sorted(DESIGNS)}")
        if len(set(self.designs)) != len(self.designs):
            raise ValueError("design labels must not repeat")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def sample_true_parameters(true_candidate: CandidateModel, rng: np.random.Generator) -> TrueParameters:
    """Draw one generating parameter set for a structure.

    Mean coefficients are near-zero normals (mu0, mu1, mu2 centered at
    0.01, 0.005, 0.0025; free alphas at 0.01, all with unit variance);
    free variances are uniform on [0.01, 1.01]; sigma2 is fixed at 1.
    Parameters absent from the structure are exact zeros.
    """
    mu = np.array(
        [
            rng.normal(0.01, 1.0),
            rng.normal(0.005, 1.0),
            rng.normal(0.0025, 1.0),
        ]
    )
    alpha = np.array(
        [
            rng.normal(0.01, 1.0) if true_candidate.alpha1_free else 0.0,
            rng.normal(0.01, 1.0) if true_candidate.alpha2_free else 0.0,
        ]
    )
    omega2 = np.array(
        [
            rng.uniform(0.01, 1.01),
            rng.uniform(0.01, 1.01) if true_candidate.omega1_free else 0.0,
            rng.uniform(0.01, 1.01) if true_candidate.omega2_free else 0.0,
        ]
    )
    return TrueParameters(mu=mu, alpha=alpha, omega2=omega2, sigma2=1.0)


@dataclass(frozen=True)
class ReplicateResult:
    """Winners per criterion for one simulated dataset.

    selections is None when no candidate fit survived, in which case
    the replicate is dropped from every denominator.
    """

    design_label: str
    truth_id: str
    replicate_index: int
    selections: dict[str, str] | None
    n_fits: int
    n_failed: int


def run_replicate(
    design: SimulationDesign,
    true_candidate: CandidateModel,
    replicate_index: int,
    config: StudyConfig,
) -> ReplicateResult:
    """Simulate one dataset and let every criterion pick its winner.

    Candidate fits that error out or stop without meeting the
    convergence tolerance are logged and excluded from the ranking.
    """
    design_index = sorted(DESIGNS).index(design.label)
    truth_index = true_candidate.enumeration_index
    truth_rng = substream(config.seed, design_index, truth_index, replicate_index, 0)
    truth = sample_true_parameters(true_candidate, truth_rng)
    data_seed = int(
        substream(config.seed, design_index, truth_index, replicate_index, 1).integers(2 ** 63)
    )
    data = generate_dataset(design, truth, data_seed)

    reports = []
    failed = 0
    for cand in enumerate_candidates():
        try:
            fit = fit_ml(cand, data, config.fit_options)
        except (UnidentifiableModelError, np.linalg.LinAlgError) as exc:
            logger.warning(
                "design %s truth %s rep %d: candidate %s failed to fit (%s)",
                design.label, true_candidate.id, replicate_index, cand.id, exc,
            )
            failed += 1
            continue
        if not fit.converged:
            logger.warning(
                "design %s truth %s rep %d: candidate %s did not converge; excluded",
                design.label, true_candidate.id, replicate_index, cand.id,
            )
            failed += 1
            continue
        reports.append(build_report(fit))

    if not reports:
        logger.warning(
            "design %s truth %s rep %d: no candidate converged; replicate dropped",
            design.label, true_candidate.id, replicate_index,
        )
        selections = None
    else:
        selections = {crit: select_model(reports, crit) for crit in CRITERIA}
    return ReplicateResult(
        design_label=design.label,
        truth_id=true_candidate.id,
        replicate_index=replicate_index,
        selections=selections,
        n_fits=16,
        n_failed=failed,
    )


@dataclass(frozen=True)
class SelectionCell:
    """Correct-selection count for one (design, truth, criterion) cell."""

    design: str
    truth: str
    criterion: str
    correct: int
    replicates: int

    @property
    def frequency(self) -> float:
        return self.correct / self.replicates if self.replicates else 0.0


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Tallied study results.

    rows hold per-(design, truth, criterion) counts over the valid
    replicates; aggregates() pools the truths within a design.
    """

    rows: tuple[SelectionCell, ...]
    invalid_replicates: int
    total_fits: int
    failed_fits: int

    @property
    def nonconvergence_rate(self) -> float:
        return self.failed_fits / self.total_fits if self.total_fits else 0.0

    def aggregates(self) -> list[tuple[str, str, float]]:
        """(design, criterion, pooled frequency) in row order."""
        totals: dict[tuple[str, str], list[int]] = {}
        order = []
        for row in self.rows:
            key = (row.design, row.criterion)
            if key not in totals:
                totals[key] = [0, 0]
                order.append(key)
            totals[key][0] += row.correct
            totals[key][1] += row.replicates
        out = []
        for key in order:
            correct, count = totals[key]
            out.append((key[0], key[1], correct / count if count else 0.0))
        return out


def _replicate_task(args: tuple[str, int, int, StudyConfig]) -> ReplicateResult:
    design_label, truth_index, replicate_index, config = args
    truth = enumerate_candidates()[truth_index]
    return run_replicate(DESIGNS[design_label], truth, replicate_index, config)


def run_study(config: StudyConfig, n_workers: int | None = None) -> FrequencyTable:
    """Run the full study grid and tally correct selections.

    n_workers > 1 spreads replicates over a process pool; results are
    aggregated in task order, so the table is identical for any worker
    count.
    """
    truths = enumerate_candidates()
    tasks = [
        (design_label, truth.enumeration_index, rep, config)
        for design_label in config.designs
        for truth in truths
        for rep in range(config.replicates)
    ]
    workers = 1 if n_workers is None else max(1, n_workers)
    if workers == 1 or len(tasks) == 1:
        results = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=4))

    counts: dict[tuple[str, str, str], list[int]] = {}
    invalid = 0
    total_fits = 0
    failed_fits = 0
    for res in results:
        total_fits += res.n_fits
        failed_fits += res.n_failed
        if res.selections is None:
            invalid += 1
            continue
        for crit in CRITERIA:
            key = (res.design_label, res.truth_id, crit)
            cell = counts.setdefault(key, [0, 0])
            cell[0] += int(res.selections[crit] == res.truth_id)
            cell[1] += 1

    rows = []
    for design_label in config.designs:
        for truth in truths:
            for crit in CRITERIA:
                key = (design_label, truth.id, crit)
                correct, count = counts.get(key, [0, 0])
                rows.append(
                    SelectionCell(
                        design=design_label,
                        truth=truth.id,
                        criterion=crit,
                        correct=correct,
                        replicates=count,
                    )
                )
    table = FrequencyTable(
        rows=tuple(rows),
        invalid_replicates=invalid,
        total_fits=total_fits,
        failed_fits=failed_fits,
    )
    logger.info(
        "study finished: %d replicates dropped, non-convergence rate %.4f",
        invalid, table.nonconvergence_rate,
    )
    return table
