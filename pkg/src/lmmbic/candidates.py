"""The sixteen candidate structures for the quadratic growth model.

Each subject's response is quadratic in the within-subject covariate,
with subject-specific coefficients:

    y_ij = psi_i0 + psi_i1 * x_ij + psi_i2 * x_ij**2 + eps_ij

    psi_i0 = mu0                + eta_i0
    psi_i1 = mu1 + alpha1 * c_i + eta_i1
    psi_i2 = mu2 + alpha2 * c_i + eta_i2

where eta_ik ~ N(0, omega_k^2) are subject random effects and eps is
white noise with variance sigma2.  A candidate toggles alpha1/alpha2 in
the mean (structures M1..M4) and the variances omega1^2/omega2^2
(structures O1..O4); the intercept variance omega0^2 is always free.

Expanding the coefficients gives the fixed-effect regressors
[1, x, x^2] plus c*x and/or c*x^2, and the random-effect regressors
[1] plus x and/or x^2, which is what build_design assembles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .data import Dataset, SubjectBlock
from .rng import substream

if TYPE_CHECKING:  # pragma: no cover
    from .simulation import SimulationDesign

MEAN_LABELS = ("mu0", "mu1", "mu2", "alpha1", "alpha2")
VARIANCE_LABELS = ("omega0", "omega1", "omega2")

X_RANGE = (0.0, 10.0)


@dataclass(frozen=True)
class CandidateModel:
    """One mean/variance structure, identified as O{o}M{m}.

    m selects which alpha terms enter the mean: 1 neither, 2 only
    alpha1, 3 only alpha2, 4 both.  o selects which slope variances are
    free, with the same coding for omega1^2/omega2^2.
    """

    m: int
    o: int

    def __post_init__(self) -> None:
        if self.m not in (1, 2, 3, 4) or self.o not in (1, 2, 3, 4):
            raise ValueError(f"candidate indices must be in 1..4, got m={self.m}, o={self.o}")

    @property
    def id(self) -> str:
        return f"O{self.o}M{self.m}"

    @classmethod
    def from_id(cls, text: str) -> "CandidateModel":
        text = text.strip().upper()
        if len(text) != 4 or text[0] != "O" or text[2] != "M":
            raise ValueError(f"candidate id must look like 'O2M1', got {text!r}")
        try:
            o, m = int(text[1]), int(text[3])
        except ValueError:
            raise ValueError(f"candidate id must look like 'O2M1', got {text!r}") from None
        return cls(m=m, o=o)

    @property
    def alpha1_free(self) -> bool:
        return self.m in (2, 4)

    @property
    def alpha2_free(self) -> bool:
        return self.m in (3, 4)

    @property
    def omega1_free(self) -> bool:
        return self.o in (2, 4)

    @property
    def omega2_free(self) -> bool:
        return self.o in (3, 4)

    def mean_labels(self) -> tuple[str, ...]:
        labels = ["mu0", "mu1", "mu2"]
        if self.alpha1_free:
            labels.append("alpha1")
        if self.alpha2_free:
            labels.append("alpha2")
        return tuple(labels)

    def variance_labels(self) -> tuple[str, ...]:
        labels = ["omega0"]
        if self.omega1_free:
            labels.append("omega1")
        if self.omega2_free:
            labels.append("omega2")
        return tuple(labels)

    @property
    def n_mean(self) -> int:
        return 3 + self.alpha1_free + self.alpha2_free

    @property
    def n_variance(self) -> int:
        return 1 + self.omega1_free + self.omega2_free

    @property
    def n_parameters(self) -> int:
        """Free parameters in total: means, variances and sigma2."""
        return self.n_mean + self.n_variance + 1

    @property
    def enumeration_index(self) -> int:
        return (self.o - 1) * 4 + (self.m - 1)


def enumerate_candidates() -> list[CandidateModel]:
    """All sixteen candidates, O varying slowest: O1M1, O1M2, ..., O4M4."""
    return [CandidateModel(m=m, o=o) for o in (1, 2, 3, 4) for m in (1, 2, 3, 4)]


@dataclass(frozen=True, eq=False)
class DesignBlocks:
    """Per-subject design matrices: X for the mean, Z for the random effects."""

    X: np.ndarray
    Z: np.ndarray

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]


def build_design(candidate: CandidateModel, block: SubjectBlock) -> DesignBlocks:
    """Assemble X_i and Z_i for one subject under one candidate.

    Column order is fixed: X_i holds [1, x, x^2], then c*x when alpha1
    is in the mean, then c*x^2 when alpha2 is; Z_i holds [1], then x
    when omega1^2 is free, then x^2 when omega2^2 is.
    """
    x = block.x
    xsq = x * x
    ones = np.ones_like(x)
    xcols = [ones, x, xsq]
    if candidate.alpha1_free:
        xcols.append(block.c * x)
    if candidate.alpha2_free:
        xcols.append(block.c * xsq)
    zcols = [ones]
    if candidate.omega1_free:
        zcols.append(x)
    if candidate.omega2_free:
        zcols.append(xsq)
    X = np.column_stack(xcols)
    Z = np.column_stack(zcols)
    X.flags.writeable = False
    Z.flags.writeable = False
    return DesignBlocks(X=X, Z=Z)


@dataclass(frozen=True, eq=False)
class TrueParameters:
    """A full generating parameter set; entries absent from the
    generating structure are stored as exact zeros.

    Attributes:
        mu: (mu0, mu1, mu2).
        alpha: (alpha1, alpha2).
        omega2: (omega0^2, omega1^2, omega2^2).
        sigma2: noise variance.
    """

    mu: np.ndarray
    alpha: np.ndarray
    omega2: np.ndarray
    sigma2: float

    def __post_init__(self) -> None:
        mu = np.array(self.mu, dtype=float)
        alpha = np.array(self.alpha, dtype=float)
        omega2 = np.array(self.omega2, dtype=float)
        if mu.shape != (3,) or alpha.shape != (2,) or omega2.shape != (3,):
            raise ValueError("expected shapes: mu (3,), alpha (2,), omega2 (3,)")
        if np.any(omega2 < 0) or self.sigma2 <= 0:
            raise ValueError("variances must be non-negative and sigma2 positive")
        for arr in (mu, alpha, omega2):
            arr.flags.writeable = False
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "omega2", omega2)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    def free_values(self, candidate: CandidateModel) -> tuple[np.ndarray, np.ndarray, float]:
        """The (beta, omega2, sigma2) triple seen by `candidate`.

        beta follows the X column order of build_design; omega2 follows
        the Z column order.  Only meaningful when this parameter set is
        compatible with the candidate (zeros where the candidate has no
        term).
        """
        beta = list(self.mu)
        if candidate.alpha1_free:
            beta.append(self.alpha[0])
        if candidate.alpha2_free:
            beta.append(self.alpha[1])
        omegas = [self.omega2[0]]
        if candidate.omega1_free:
            omegas.append(self.omega2[1])
        if candidate.omega2_free:
            omegas.append(self.omega2[2])
        return np.array(beta), np.array(omegas), self.sigma2


def shared_x_grid(n_per_subject: int) -> np.ndarray:
    """Observation times common to every subject: equally spaced over
    [0, 10] including both endpoints."""
    if n_per_subject < 2:
        raise ValueError("need at least two observations per subject")
    return np.linspace(X_RANGE[0], X_RANGE[1], n_per_subject)


def generate_dataset(design: "SimulationDesign", truth: TrueParameters, seed: int) -> Dataset:
    """Simulate one dataset from `truth` on the given design.

    Subject i draws its covariate and random effects from the Philox
    substream (seed, i, 0) and its noise vector from (seed, i, 1), so
    the result is reproducible and independent of generation order.
    Random-effect draws are always taken for all three components and
    scaled by the stored standard deviations, which keeps the stream
    layout identical across generating structures.
    """
    x = shared_x_grid(design.n_per_subject)
    xsq = x * x
    sd_eta = np.sqrt(truth.omega2)
    sd_eps = np.sqrt(truth.sigma2)
    width = len(str(design.n_subjects))
    subjects = []
    for i in range(design.n_subjects):
        draw = substream(seed, i, 0)
        noise = substream(seed, i, 1)
        c = draw.normal(0.0, 1.0)
        eta = draw.normal(0.0, 1.0, size=3) * sd_eta
        psi0 = truth.mu[0] + eta[0]
        psi1 = truth.mu[1] + truth.alpha[0] * c + eta[1]
        psi2 = truth.mu[2] + truth.alpha[1] * c + eta[2]
        y = psi0 + psi1 * x + psi2 * xsq + sd_eps * noise.normal(0.0, 1.0, size=x.size)
        subjects.append(SubjectBlock(id=f"s{i + 1:0{width}d}", x=x, c=c, y=y))
    return Dataset(subjects=tuple(subjects))
