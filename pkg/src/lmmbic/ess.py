"""Effective sample size of correlated responses.

n observations with correlation matrix R carry the information of
1' R^-1 1 independent ones; that scalar is the magnitude of R.  For an
exchangeable n x n block with correlation rho it reduces to
n / (1 + (n - 1) rho), so strong positive correlation shrinks the
count toward 1 and independence leaves it at n.

Grouped data has block-diagonal correlation, so the dataset total is
the sum of per-subject magnitudes; the full matrix is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .estimation import FittedModel
from .model import assemble_marginal_covariance, correlation_from_covariance


def magnitude(R: np.ndarray) -> float:
    """Sum of the entries of R^-1, via one solve against the ones vector.

    Expects a symmetric positive-definite matrix (a correlation matrix
    in this package's usage).  Raises numpy.linalg.LinAlgError or
    scipy's LinAlgError when the factorization fails.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("R must be square")
    factor = cho_factor(R, lower=True, check_finite=False)
    w = cho_solve(factor, np.ones(R.shape[0]), check_finite=False)
    return float(w.sum())


@dataclass(frozen=True, eq=False)
class CorrelationStructure:
    """Model-implied correlation blocks and their magnitude weights."""

    blocks: tuple[np.ndarray, ...]
    weights: tuple[float, ...]
    n_e: float


def correlation_structure(fit: FittedModel) -> CorrelationStructure:
    """Per-subject implied correlation matrices and magnitudes for a fit."""
    blocks = []
    weights = []
    for d in fit.designs:
        V = assemble_marginal_covariance(d.Z, fit.theta_hat.omega2, fit.theta_hat.sigma2)
        R = correlation_from_covariance(V)
        blocks.append(R)
        weights.append(magnitude(R))
    return CorrelationStructure(
        blocks=tuple(blocks),
        weights=tuple(weights),
        n_e=float(sum(weights)),
    )


def effective_sample_size(fit: FittedModel) -> float:
    """Total magnitude of the fit's implied correlation structure.

    Equals sum_i 1' R_i^-1 1 over subjects.  Subjects sharing an
    observation grid share R_i, so each distinct grid is factorized
    once.
    """
    counts: dict[bytes, tuple[np.ndarray, int]] = {}
    for d in fit.designs:
        key = d.Z.tobytes()
        if key in counts:
            Z, c = counts[key]
            counts[key] = (Z, c + 1)
        else:
            counts[key] = (d.Z, 1)
    total = 0.0
    for Z, count in counts.values():
        V = assemble_marginal_covariance(Z, fit.theta_hat.omega2, fit.theta_hat.sigma2)
        total += count * magnitude(correlation_from_covariance(V))
    return total
