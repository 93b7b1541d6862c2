"""Maximum-likelihood fitting of one candidate structure.

The mean coefficients have a closed form at fixed variances: the
generalized-least-squares solution

    beta_hat = (sum_i X_i' V_i^-1 X_i)^-1  sum_i X_i' V_i^-1 y_i

maximizes the likelihood over beta, so the numerical search runs only
over the log variances, a space of dimension q + 1 <= 4.

Each objective evaluation would naively refactor every n_i x n_i block.
Instead, per-subject cross-products (Z'Z, Z'X_i, Z'y_i, X'X, X'y, y'y)
are computed once per candidate and dataset, and the inversion and
determinant lemmas reduce V_i^-1 and log det V_i to the q x q
"capacitance" matrix

    M = sigma2 * I_q + W^(1/2) Z'Z W^(1/2),      W = diag(omega2),

which stays well conditioned as variances approach zero.  Subjects that
share an observation grid share Z, so their cross-products collapse
into group tensors and the evaluation cost does not grow with the
number of subjects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .candidates import CandidateModel, DesignBlocks, build_design
from .data import Dataset
from .model import LN_TWO_PI, ParameterVector, assemble_marginal_covariance
from .rng import substream

# Log-variance bounds used inside the optimizer; the lower bound is the
# configured floor, this is just the overflow guard above.
_LOG_CEILING = 50.0


class UnidentifiableModelError(ValueError):
    """The candidate's mean structure is not estimable from the data."""


@dataclass(frozen=True)
class FitOptions:
    """Controls for the variance search.

    seed drives the restart-jitter stream, so fits are reproducible
    bit for bit.
    """

    max_iterations: int = 2000
    rel_tolerance: float = 1e-8
    n_restarts: int = 3
    variance_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be at least 1")
        if not self.variance_floor > 0:
            raise ValueError("variance_floor must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Result of fit_ml.

    boundary lists the variance labels (omega* or sigma2) whose
    estimate landed on the configured floor; such solutions are
    reported rather than rejected.
    """

    candidate: CandidateModel
    theta_hat: ParameterVector
    loglik: float
    converged: bool
    boundary: tuple[str, ...]
    designs: tuple[DesignBlocks, ...]
    n_obs: int
    n_subjects: int

    def covariance_blocks(self) -> list[np.ndarray]:
        """Per-subject marginal covariances V_i at the fitted variances."""
        return [
            assemble_marginal_covariance(d.Z, self.theta_hat.omega2, self.theta_hat.sigma2)
            for d in self.designs
        ]


@dataclass(frozen=True, eq=False)
class _GridGroup:
    """Cross-product tensors for subjects sharing one observation grid.

    The cross tensors are stored with their two capacitance axes
    flattened in front, so the correction terms in evaluate() are
    single matrix-vector products against the flattened kernel.
    """

    count: int
    n_per: int
    ZtZ: np.ndarray          # (q, q)
    cross_xx: np.ndarray     # (q*q, p*p): sum_i Z'X_i (x) Z'X_i
    cross_xy: np.ndarray     # (q*q, p):   sum_i Z'X_i (x) Z'y_i
    cross_yy: np.ndarray     # (q*q,):     sum_i Z'y_i (x) Z'y_i


class ProfiledLikelihood:
    """Callable core of the fit: likelihood with beta profiled out.

    Construction performs all O(n) work; evaluate() then costs a few
    q x q and p x p operations per distinct observation grid.
    """

    def __init__(self, candidate: CandidateModel, data: Dataset):
        if (candidate.alpha1_free or candidate.alpha2_free) and (
            np.unique(data.subject_covariates()).size < 2
        ):
            raise UnidentifiableModelError(
                f"candidate {candidate.id} has a covariate-by-x term but "
                "the subject covariate takes a single value"
            )
        designs = tuple(build_design(candidate, b) for b in data.subjects)
        self.candidate = candidate
        self.designs = designs
        self.p = designs[0].X.shape[1]
        self.q = designs[0].Z.shape[1]
        self.n_obs = data.n_obs
        self.n_subjects = data.n_subjects

        xtx = np.zeros((self.p, self.p))
        xty = np.zeros(self.p)
        yty = 0.0
        by_grid: dict[bytes, list[int]] = {}
        for idx, block in enumerate(data.subjects):
            by_grid.setdefault(block.x.tobytes(), []).append(idx)

        p, q = self.p, self.q
        groups = []
        for indices in by_grid.values():
            Z = designs[indices[0]].Z
            Xs = np.stack([designs[i].X for i in indices])
            Ys = np.stack([data.subjects[i].y for i in indices])
            m, n = Ys.shape
            flat_x = Xs.reshape(m * n, p)
            xtx += flat_x.T @ flat_x
            xty += flat_x.T @ Ys.reshape(m * n)
            yty += float(Ys.reshape(-1) @ Ys.reshape(-1))
            ZtX = np.tensordot(Xs, Z, axes=(1, 0)).transpose(0, 2, 1)  # (m, q, p)
            Zty = Ys @ Z                                               # (m, q)
            cross_xx = np.tensordot(ZtX, ZtX, axes=(0, 0))             # (q, p, q, p)
            cross_xy = np.tensordot(ZtX, Zty, axes=(0, 0))             # (q, p, q)
            cross_yy = Zty.T @ Zty                                     # (q, q)
            groups.append(
                _GridGroup(
                    count=m,
                    n_per=n,
                    ZtZ=Z.T @ Z,
                    cross_xx=np.ascontiguousarray(
                        cross_xx.transpose(0, 2, 1, 3).reshape(q * q, p * p)
                    ),
                    cross_xy=np.ascontiguousarray(
                        cross_xy.transpose(0, 2, 1).reshape(q * q, p)
                    ),
                    cross_yy=cross_yy.reshape(q * q),
                )
            )
        if np.linalg.matrix_rank(xtx, hermitian=True) < p:
            raise UnidentifiableModelError(
                f"mean design for candidate {candidate.id} is rank deficient"
            )
        self._groups = groups
        self._xtx = xtx
        self._xty = xty
        self._yty = yty
        self._eye_q = np.eye(self.q)

    def evaluate(self, omega2: np.ndarray, sigma2: float) -> tuple[float, np.ndarray]:
        """Profiled log-likelihood and the GLS beta at these variances.

        Raises:
            numpy.linalg.LinAlgError: capacitance factorization broke
                down (numerically invalid variances).
            UnidentifiableModelError: the GLS normal matrix is singular.
        """
        p, q = self.p, self.q
        w_half = np.sqrt(omega2)
        log_sigma2 = math.log(sigma2)
        A = self._xtx.copy()
        b = self._xty.copy()
        quad_const = self._yty
        logdet_total = 0.0
        for g in self._groups:
            M = w_half[:, None] * g.ZtZ * w_half[None, :]
            M.flat[:: q + 1] += sigma2
            L = np.linalg.cholesky(M)
            logdet_m = 2.0 * math.log(float(np.diagonal(L).prod()))
            logdet_total += g.count * ((g.n_per - q) * log_sigma2 + logdet_m)
            Minv = cho_solve((L, True), self._eye_q, check_finite=False)
            kernel = (w_half[:, None] * Minv * w_half[None, :]).reshape(q * q)
            A -= (kernel @ g.cross_xx).reshape(p, p)
            b -= kernel @ g.cross_xy
            quad_const -= float(kernel @ g.cross_yy)
        A /= sigma2
        b /= sigma2
        quad_const /= sigma2
        try:
            La = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            raise UnidentifiableModelError(
                f"normal matrix for candidate {self.candidate.id} is singular"
            ) from None
        beta = cho_solve((La, True), b, check_finite=False)
        quad = quad_const - float(b @ beta)
        loglik = -0.5 * (self.n_obs * LN_TWO_PI + logdet_total + quad)
        return loglik, beta


def profile_beta(
    omega2: np.ndarray,
    sigma2: float,
    candidate: CandidateModel,
    data: Dataset,
) -> tuple[np.ndarray, float]:
    """GLS mean coefficients and profiled log-likelihood at fixed variances.

    The returned log-likelihood is recomputed through the per-block
    Cholesky path of model.log_likelihood at the profiled solution.
    """
    from .model import log_likelihood

    omega2 = np.asarray(omega2, dtype=float)
    prof = ProfiledLikelihood(candidate, data)
    if omega2.shape != (prof.q,):
        raise ValueError(
            f"candidate {candidate.id} has {prof.q} random-effect variances, "
            f"got {omega2.size}"
        )
    _, beta = prof.evaluate(omega2, sigma2)
    params = ParameterVector(beta=beta, omega2=omega2, sigma2=sigma2)
    return beta, log_likelihood(params, candidate, data)


def _nelder_mead(
    objective,
    x0: np.ndarray,
    max_iterations: int,
    rel_tol: float,
    step: float = 1.0,
) -> tuple[np.ndarray, float, bool]:
    """Minimize with the classic reflect/expand/contract/shrink simplex.

    Converged means the spread of function values across the simplex
    dropped below rel_tol relative to the best value, i.e. a full
    update cycle produced no meaningful relative improvement.  The best
    vertex is never discarded, so the result is monotone in the start
    value.
    """
    d = x0.size
    simplex = np.tile(x0, (d + 1, 1))
    for i in range(d):
        simplex[i + 1, i] += step
    fvals = [float(objective(v)) for v in simplex]
    vertex_sum = simplex.sum(axis=0)
    converged = False

    def replace_worst(iw: int, vertex: np.ndarray, value: float) -> None:
        nonlocal vertex_sum
        vertex_sum = vertex_sum + (vertex - simplex[iw])
        simplex[iw] = vertex
        fvals[iw] = value

    for _ in range(max_iterations):
        ib = min(range(d + 1), key=fvals.__getitem__)
        iw = max(range(d + 1), key=fvals.__getitem__)
        f_best, f_worst = fvals[ib], fvals[iw]
        if f_worst - f_best <= rel_tol * (1.0 + abs(f_best)):
            converged = True
            break
        f_second = max(v for i, v in enumerate(fvals) if i != iw)
        centroid = (vertex_sum - simplex[iw]) / d
        step_out = centroid - simplex[iw]
        reflected = centroid + step_out
        f_reflected = float(objective(reflected))
        if f_reflected < f_best:
            expanded = centroid + 2.0 * step_out
            f_expanded = float(objective(expanded))
            if f_expanded < f_reflected:
                replace_worst(iw, expanded, f_expanded)
            else:
                replace_worst(iw, reflected, f_reflected)
        elif f_reflected < f_second:
            replace_worst(iw, reflected, f_reflected)
        else:
            if f_reflected < f_worst:
                contracted = centroid + 0.5 * step_out
            else:
                contracted = centroid - 0.5 * step_out
            f_contracted = float(objective(contracted))
            if f_contracted < min(f_reflected, f_worst):
                replace_worst(iw, contracted, f_contracted)
            else:
                best = simplex[ib].copy()
                simplex[:] = best + 0.5 * (simplex - best)
                for i in range(d + 1):
                    if i != ib:
                        fvals[i] = float(objective(simplex[i]))
                vertex_sum = simplex.sum(axis=0)
    ib = min(range(d + 1), key=fvals.__getitem__)
    return simplex[ib].copy(), fvals[ib], converged


def _moment_start(designs: tuple[DesignBlocks, ...], data: Dataset, q: int, floor: float) -> np.ndarray:
    """Log-variance start: OLS residual variance for sigma2, half of it
    for each random-effect variance."""
    X = np.vstack([d.X for d in designs])
    y = np.concatenate([b.y for b in data.subjects])
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(y.size - X.shape[1], 1)
    s0 = max(float(resid @ resid) / dof, floor)
    start = np.log(np.array([0.5 * s0] * q + [s0]))
    return np.clip(start, math.log(floor), _LOG_CEILING)


def fit_ml(
    candidate: CandidateModel,
    data: Dataset,
    options: FitOptions = FitOptions(),
) -> FittedModel:
    """Fit one candidate by maximum likelihood.

    Runs a multistart simplex search over log variances (the first
    start from moment estimates, later starts jittered by a factor
    exp(U[-1, 1]) per coordinate), then a refinement pass with a small
    simplex from the best point found.  The reported log-likelihood is
    the maximum over all starts.  Variances that land on the floor are
    listed in `boundary`; a search that exhausts max_iterations is
    returned with converged=False rather than raised.

    Raises:
        UnidentifiableModelError: fewer observations than parameters,
            rank-deficient mean design, or an alpha term with a
            constant subject covariate.
    """
    if data.n_obs <= candidate.n_parameters:
        raise UnidentifiableModelError(
            f"candidate {candidate.id} has {candidate.n_parameters} parameters "
            f"but the data has only {data.n_obs} observations"
        )
    prof = ProfiledLikelihood(candidate, data)
    q = prof.q
    log_floor = math.log(options.variance_floor)

    def objective(z: np.ndarray) -> float:
        # rank deficiency is rejected at construction, so a breakdown
        # here means the variances are numerically extreme, not that
        # the model is unidentifiable: price the point out instead
        v = np.exp(np.clip(z, log_floor, _LOG_CEILING))
        try:
            loglik, _ = prof.evaluate(v[:q], float(v[q]))
        except (np.linalg.LinAlgError, UnidentifiableModelError):
            return math.inf
        return -loglik if math.isfinite(loglik) else math.inf

    start = _moment_start(prof.designs, data, q, options.variance_floor)
    jitter = substream(options.seed)
    best_z: np.ndarray | None = None
    best_f = math.inf
    for restart in range(options.n_restarts):
        z0 = start if restart == 0 else start + jitter.uniform(-1.0, 1.0, size=q + 1)
        z, f, _ = _nelder_mead(objective, z0, options.max_iterations, options.rel_tolerance)
        if f < best_f:
            best_z, best_f = z, f
    # Refinement from the incumbent with a tight simplex; monotone, so
    # this can only improve the incumbent.
    best_z, best_f, converged = _nelder_mead(
        objective, best_z, options.max_iterations, options.rel_tolerance, step=0.05
    )
    if not math.isfinite(best_f):
        raise UnidentifiableModelError(
            f"likelihood for candidate {candidate.id} could not be evaluated "
            "at any visited point"
        )

    z_final = np.clip(best_z, log_floor, _LOG_CEILING)
    variances = np.exp(z_final)
    loglik, beta = prof.evaluate(variances[:q], float(variances[q]))
    labels = candidate.variance_labels() + ("sigma2",)
    # On a collapsed-variance ridge the simplex can stall a hair above
    # the clamp, so treat anything within 10% of the floor as pinned.
    boundary = tuple(
        label
        for label, z in zip(labels, best_z)
        if z <= log_floor + 0.1
    )
    theta = ParameterVector(beta=beta, omega2=variances[:q], sigma2=float(variances[q]))
    return FittedModel(
        candidate=candidate,
        theta_hat=theta,
        loglik=float(loglik),
        converged=converged,
        boundary=boundary,
        designs=prof.designs,
        n_obs=prof.n_obs,
        n_subjects=prof.n_subjects,
    )
