"""Containers for grouped longitudinal data and delimited-file ingestion.

A dataset is a collection of subject blocks.  Rows within a block share
one subject id and one subject-level covariate value, and responses from
different subjects are independent, so everything downstream works block
by block and the full n x n covariance matrix is never assembled.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

REQUIRED_COLUMNS = ("subject", "x", "c", "y")


class DataFormatError(ValueError):
    """An input file cannot be parsed into a dataset."""


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class SubjectBlock:
    """All observations for one subject.

    Attributes:
        id: subject identifier, unique within a dataset.
        x: within-subject covariate, one value per observation.
        c: subject-level covariate, constant across the block.
        y: responses, aligned with x.
    """

    id: str
    x: np.ndarray
    c: float
    y: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _readonly(self.x))
        object.__setattr__(self, "y", _readonly(self.y))
        object.__setattr__(self, "c", float(self.c))
        if self.x.ndim != 1 or self.y.ndim != 1:
            raise ValueError(f"subject {self.id!r}: x and y must be one-dimensional")
        if self.x.shape != self.y.shape:
            raise ValueError(
                f"subject {self.id!r}: x has {self.x.size} rows but y has {self.y.size}"
            )
        if self.x.size == 0:
            raise ValueError(f"subject {self.id!r} has no observations")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError(f"subject {self.id!r} contains non-finite values")
        if not np.isfinite(self.c):
            raise ValueError(f"subject {self.id!r} has a non-finite covariate")

    @property
    def n_obs(self) -> int:
        return self.x.size


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of subject blocks with unique ids."""

    subjects: tuple[SubjectBlock, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "subjects", tuple(self.subjects))
        if not self.subjects:
            raise ValueError("a dataset needs at least one subject")
        ids = [s.id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")

    @property
    def n_subjects(self) -> int:
        return len(self.subjects)

    @property
    def n_obs(self) -> int:
        return sum(s.n_obs for s in self.subjects)

    def subject_covariates(self) -> np.ndarray:
        return np.array([s.c for s in self.subjects])


def _infer_delimiter(header_line: str) -> str:
    for cand in ("\t", ";", ","):
        if cand in header_line:
            return cand
    return ","


def read_dataset(path: str | Path) -> Dataset:
    """Read a delimited text file with columns subject, x, c and y.

    The delimiter (comma, semicolon or tab) is inferred from the header
    row.  Rows are grouped by subject in order of first appearance and
    the within-subject row order is preserved.  The subject-level
    covariate must be constant within each subject.

    Raises:
        DataFormatError: on a missing column, an unparsable number
            (reported with its line number), or a subject whose c value
            changes between rows.
    """
    path = Path(path)
    with path.open(newline="") as handle:
        first = handle.readline()
        if not first.strip():
            raise DataFormatError(f"{path}: file is empty")
        handle.seek(0)
        reader = csv.DictReader(handle, delimiter=_infer_delimiter(first))
        header = [h.strip() for h in reader.fieldnames or []]
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise DataFormatError(f"{path}: missing column {column!r}")

        order: list[str] = []
        xs: dict[str, list[float]] = {}
        ys: dict[str, list[float]] = {}
        cs: dict[str, float] = {}
        for row in reader:
            line = reader.line_num
            subject = (row.get("subject") or "").strip()
            if not subject:
                raise DataFormatError(f"{path}:{line}: empty subject id")
            values = {}
            for column in ("x", "c", "y"):
                raw = (row.get(column) or "").strip()
                try:
                    values[column] = float(raw)
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{line}: column {column!r} has non-numeric value {raw!r}"
                    ) from None
            if subject not in cs:
                order.append(subject)
                cs[subject] = values["c"]
                xs[subject] = []
                ys[subject] = []
            elif values["c"] != cs[subject]:
                raise DataFormatError(
                    f"{path}:{line}: subject {subject!r} has inconsistent c "
                    f"({values['c']!r} after {cs[subject]!r})"
                )
            xs[subject].append(values["x"])
            ys[subject].append(values["y"])

    if not order:
        raise DataFormatError(f"{path}: no data rows")
    blocks = tuple(
        SubjectBlock(id=sid, x=np.array(xs[sid]), c=cs[sid], y=np.array(ys[sid]))
        for sid in order
    )
    return Dataset(subjects=blocks)
