"""Sparse regression by hyperparameter-weighted reweighted-L1 iterations.

The solver alternates three steps until the evidence-style objective stops
decreasing: compute per-column weights from the current prior variances,
solve a weighted lasso by cyclic coordinate descent, and refresh the prior
variances from the new coefficients. The objective is guaranteed
non-increasing along the iterates, which the implementation checks and
enforces at runtime, and converged runs satisfy explicit stationarity
conditions that are also exposed for inspection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from .dictionary import Dictionary, DictionaryError, parse_term

__all__ = [
    "SBLConfig",
    "SBLResult",
    "LassoSolution",
    "CoefficientError",
    "NumericalError",
    "ConvergenceError",
    "compute_weights",
    "weighted_lasso",
    "update_gamma",
    "cost",
    "run_sbl",
    "kkt_residual",
    "orthonormal_fixed_point_check",
    "coeff_error",
]

# Row count above which the weight computation switches from the n x n
# factorization to the equivalent m x m (low-rank) route.
DENSE_ROUTE_MAX_ROWS = 2000

# Converged runs must satisfy the stationarity conditions to this scale
# (relative to 1 + max |phi^T y|).
KKT_RTOL = 1e-6

# Tolerated objective increase between iterates before the run is aborted.
MONOTONICITY_SLACK = 1e-9


class NumericalError(RuntimeError):
    """Linear algebra failed in a way that signals corrupted inputs."""


class ConvergenceError(RuntimeError):
    """The solver could not reach its stopping criteria."""


@dataclass(frozen=True)
class SBLConfig:
    """Solver knobs.

    ``sigma2`` is the assumed noise variance; ``"auto"`` estimates it from
    the residual variance of an ordinary least-squares fit. ``lam`` scales
    the sparsity penalty (1.0 is the plain algorithm). ``tau`` stops the
    outer loop once the objective decrease falls below ``tau * (1 + |L0|)``.
    ``prune_threshold`` (relative to the largest coefficient magnitude)
    fixes the reported support, and ``refit_ols`` re-estimates surviving
    coefficients without shrinkage.
    """

    sigma2: float | str = "auto"
    lam: float = 1.0
    tau: float = 1e-6
    max_outer: int = 100
    inner_tol: float = 1e-10
    max_inner: int = 10000
    prune_threshold: float = 1e-3
    normalize_columns: bool = True
    refit_ols: bool = True
    kkt_rtol: float = KKT_RTOL
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.sigma2, str):
            if self.sigma2 != "auto":
                raise ValueError(f"sigma2 must be positive or 'auto', got {self.sigma2!r}")
        elif not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if self.kkt_rtol > KKT_RTOL:
            raise ValueError(f"kkt_rtol must not exceed {KKT_RTOL}")
        for name in ("lam", "tau", "inner_tol", "kkt_rtol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass(frozen=True)
class LassoSolution:
    """Weighted-lasso output; ``converged`` is False when the sweep budget
    ran out before the optimality conditions were met."""

    theta: np.ndarray
    converged: bool
    sweeps: int
    violation: float


@dataclass(frozen=True)
class SBLResult:
    """Final estimate and diagnostics of one solver run.

    ``theta`` is pruned and (optionally) OLS-refit, in the original column
    scaling; ``raw_theta`` is the converged iterate before pruning/refit.
    ``gamma`` and ``kkt_residual`` refer to the normalized system the
    iterations ran on.
    """

    theta: np.ndarray
    raw_theta: np.ndarray
    gamma: np.ndarray
    support: tuple[int, ...]
    cost_trace: tuple[float, ...]
    converged: bool
    outer_iterations: int
    kkt_residual: float
    sigma2: float
    column_names: tuple[str, ...] = ()

    @property
    def support_size(self) -> int:
        return len(self.support)


def _as_matrix(phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2:
        raise ValueError(f"phi must be 2-D, got shape {phi.shape}")
    return phi


def _weights_dense(phi: np.ndarray, gamma: np.ndarray, sigma2: float) -> np.ndarray:
    n = phi.shape[0]
    cov = sigma2 * np.eye(n) + (phi * gamma) @ phi.T
    try:
        cho = scipy.linalg.cho_factor(cov, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance factorization failed: {exc}") from exc
    solved = scipy.linalg.cho_solve(cho, phi)
    return np.einsum("ij,ij->j", phi, solved)


def _weights_lowrank(
    phi: np.ndarray,
    gamma: np.ndarray,
    sigma2: float,
    gram: np.ndarray | None = None,
) -> np.ndarray:
    m = phi.shape[1]
    G = phi.T @ phi if gram is None else gram
    sq = np.sqrt(gamma)
    M = sigma2 * np.eye(m) + sq[:, None] * G * sq[None, :]
    W = sq[:, None] * G
    try:
        cho = scipy.linalg.cho_factor(M, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"covariance factorization failed: {exc}") from exc
    Z = scipy.linalg.cho_solve(cho, W)
    return (np.diag(G) - np.einsum("ij,ij->j", W, Z)) / sigma2


def compute_weights(
    phi: np.ndarray,
    gamma: np.ndarray,
    sigma2: float,
    gram: np.ndarray | None = None,
) -> np.ndarray:
    """Per-column curvature weights of the current covariance model.

    ``c[i] = phi_i^T (sigma2*I + phi diag(gamma) phi^T)^{-1} phi_i``,
    evaluated through a symmetric positive-definite factorization. Systems
    with more than ``DENSE_ROUTE_MAX_ROWS`` rows use the algebraically
    identical m x m route. The result satisfies
    ``0 < c[i] <= ||phi_i||^2 / sigma2``.
    """
    phi = _as_matrix(phi)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be elementwise nonnegative")
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    if phi.shape[0] <= DENSE_ROUTE_MAX_ROWS and gram is None:
        c = _weights_dense(phi, gamma, sigma2)
    else:
        c = _weights_lowrank(phi, gamma, sigma2, gram)
    norms2 = np.einsum("ij,ij->j", phi, phi)
    if np.any(norms2 == 0):
        raise ValueError("phi has a zero column")
    return np.clip(c, np.finfo(float).tiny, norms2 / sigma2)


def _soft(z: float, t: float) -> float:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def weighted_lasso(
    phi: np.ndarray,
    y: np.ndarray,
    weights: np.ndarray,
    sigma2: float,
    lam: float = 1.0,
    warm_start: np.ndarray | None = None,
    tol: float = 1e-10,
    max_inner: int = 10000,
    gram: np.ndarray | None = None,
    phity: np.ndarray | None = None,
) -> LassoSolution:
    """Minimize ``||y - phi theta||^2 + 2*lam*sigma2 * sum_i w_i |theta_i|``
    by cyclic coordinate descent with exact soft-threshold updates.

    On a converged exit the per-coordinate subgradient optimality conditions
    hold within ``tol * (1 + max|phi^T y|)``. If the sweep budget runs out
    first, the best iterate is returned with ``converged=False``.
    """
    phi = _as_matrix(phi)
    y = np.asarray(y, dtype=float)
    n, m = phi.shape
    w = np.asarray(weights, dtype=float)
    if w.shape != (m,):
        raise ValueError(f"weights must have shape ({m},), got {w.shape}")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")

    G = phi.T @ phi if gram is None else gram
    b = phi.T @ y if phity is None else phity
    a = np.diag(G).copy()
    thresh = lam * sigma2 * w
    theta = (
        np.zeros(m) if warm_start is None else np.asarray(warm_start, dtype=float).copy()
    )
    q = G @ theta
    bmax = float(np.max(np.abs(b))) if b.size else 0.0
    kkt_scale = tol * (1.0 + bmax)

    def max_violation() -> float:
        g = q - b  # gradient of the half-squared residual, = phi^T(phi theta - y)
        worst = 0.0
        for i in range(m):
            if theta[i] != 0.0:
                v = abs(g[i] + thresh[i] * math.copysign(1.0, theta[i]))
            else:
                v = max(0.0, abs(g[i]) - thresh[i])
            worst = max(worst, v)
        return worst

    converged = False
    violation = math.inf
    sweeps = 0
    for sweeps in range(1, max_inner + 1):
        for i in range(m):
            if a[i] <= 0.0:
                continue  # identically zero column: coefficient stays put
            rho = b[i] - q[i] + a[i] * theta[i]
            new = _soft(rho, thresh[i]) / a[i]
            delta = new - theta[i]
            if delta != 0.0:
                q += G[:, i] * delta
                theta[i] = new
        if sweeps % 64 == 0:
            q = G @ theta  # shed accumulated drift
        violation = max_violation()
        if violation <= kkt_scale:
            converged = True
            break
    return LassoSolution(theta=theta, converged=converged, sweeps=sweeps, violation=violation)


def update_gamma(theta: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Refresh prior variances: ``gamma_i = |theta_i| / sqrt(c_i)``."""
    theta = np.asarray(theta, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("c must be elementwise positive")
    return np.abs(theta) / np.sqrt(c)


def _logdet_cov(G: np.ndarray, gamma: np.ndarray, sigma2: float, n: int) -> float:
    sq = np.sqrt(gamma)
    M = np.eye(G.shape[0]) + (sq[:, None] * G * sq[None, :]) / sigma2
    try:
        cho = scipy.linalg.cho_factor(M, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"log-determinant factorization failed: {exc}") from exc
    return n * math.log(sigma2) + 2.0 * float(np.sum(np.log(np.diag(cho[0]))))


def cost(
    theta: np.ndarray,
    gamma: np.ndarray,
    phi: np.ndarray,
    y: np.ndarray,
    sigma2: float,
    lam: float = 1.0,
) -> float:
    """Joint objective of coefficients and prior variances.

    ``resid^2/sigma2 + lam * (sum_i theta_i^2/gamma_i + log det(sigma2*I +
    phi diag(gamma) phi^T))`` with the boundary convention that a nonzero
    coefficient with zero prior variance costs +inf, while (0, 0) pairs
    contribute nothing. At ``lam=1`` this is the plain objective the
    iteration descends; it is bounded below by ``n*log(sigma2)``.
    """
    phi = _as_matrix(phi)
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("gamma must be elementwise nonnegative")
    zero_gamma = gamma == 0
    if np.any(zero_gamma & (theta != 0)):
        return math.inf
    resid = y - phi @ theta
    quad = float(resid @ resid) / sigma2
    active = ~zero_gamma
    middle = float(np.sum(theta[active] ** 2 / gamma[active]))
    logdet = _logdet_cov(phi.T @ phi, gamma, sigma2, phi.shape[0])
    return quad + lam * (middle + logdet)


def kkt_residual(
    theta: np.ndarray,
    gamma: np.ndarray,
    phi: np.ndarray,
    y: np.ndarray,
    sigma2: float,
    lam: float = 1.0,
) -> float:
    """Largest violation of the stationarity conditions at (theta, gamma).

    Weights are recomputed at ``gamma``; nonzero coefficients must balance
    the data gradient against their penalty, zero coefficients must sit
    inside the penalty band, and ``gamma_i = |theta_i|/sqrt(c_i)`` is
    verified to 1e-8 with any excess folded into the result.
    """
    phi = _as_matrix(phi)
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    c = compute_weights(phi, gamma, sigma2)
    t = lam * sigma2 * np.sqrt(c)
    g = phi.T @ (phi @ theta - np.asarray(y, dtype=float))
    nonzero = theta != 0
    worst = 0.0
    if np.any(nonzero):
        worst = float(
            np.max(np.abs(g[nonzero] + t[nonzero] * np.sign(theta[nonzero])))
        )
    if np.any(~nonzero):
        slack = np.abs(g[~nonzero]) - t[~nonzero]
        worst = max(worst, float(np.max(np.maximum(slack, 0.0))))
    gamma_dev = float(np.max(np.abs(gamma - np.abs(theta) / np.sqrt(c))))
    if gamma_dev > 1e-8:
        worst = max(worst, gamma_dev)
    return worst


def orthonormal_fixed_point_check(
    theta_star: np.ndarray, c_star: np.ndarray, sigma2: float
) -> float:
    """Residual of the scalar fixed-point identity that holds per column
    when the design is orthonormal: ``sigma2*c + |theta|*sqrt(c) = 1``."""
    theta_star = np.asarray(theta_star, dtype=float)
    c_star = np.asarray(c_star, dtype=float)
    return float(
        np.max(np.abs(sigma2 * c_star + np.abs(theta_star) * np.sqrt(c_star) - 1.0))
    )


def _auto_sigma2(G: np.ndarray, b: np.ndarray, phi: np.ndarray, y: np.ndarray) -> float:
    n, m = phi.shape
    A = G + 1e-10 * np.eye(m)  # ridge keeps rank-deficient systems solvable
    try:
        theta_ols = scipy.linalg.solve(A, b, assume_a="pos")
    except scipy.linalg.LinAlgError:
        theta_ols = np.linalg.lstsq(phi, y, rcond=None)[0]
    resid = y - phi @ theta_ols
    est = float(resid @ resid) / max(1, n - m)
    floor = 1e-12 * (float(np.mean(y**2)) + np.finfo(float).tiny)
    return max(est, floor, np.finfo(float).tiny)


def run_sbl(dictionary: Dictionary, config: SBLConfig = SBLConfig()) -> SBLResult:
    """Full solve of a regression system.

    Steps: optionally normalize columns to unit length, resolve ``sigma2``,
    start from unit prior variances, iterate weight / weighted-lasso /
    variance updates until the objective decrease falls below
    ``tau * (1 + |L0|)`` and the stationarity residual clears
    ``KKT_RTOL * (1 + max|phi^T y|)``, then prune small coefficients and
    (optionally) refit the survivors by ordinary least squares in the
    original scaling. The recorded objective trace is checked to be
    non-increasing; an increase aborts the run.
    """
    if np.iscomplexobj(dictionary.phi):
        raise TypeError(
            "complex systems must be mapped to real form before solving"
        )
    phi = _as_matrix(dictionary.phi)
    y = np.asarray(dictionary.y, dtype=float)
    n, m = phi.shape

    norms = np.sqrt(np.einsum("ij,ij->j", phi, phi))
    if np.any(norms == 0):
        raise DictionaryError("dictionary has an identically zero column")
    scales = norms if config.normalize_columns else np.ones(m)
    phin = phi / scales
    G = phin.T @ phin
    b = phin.T @ y

    sigma2 = (
        _auto_sigma2(G, b, phin, y)
        if isinstance(config.sigma2, str)
        else float(config.sigma2)
    )

    theta = np.zeros(m)
    gamma = np.ones(m)
    cost0 = cost(theta, gamma, phin, y, sigma2, config.lam)
    trace = [cost0]
    stop_decrease = config.tau * (1.0 + abs(cost0))
    kkt_scale = KKT_RTOL * (1.0 + float(np.max(np.abs(b))))

    converged = False
    kres = math.inf
    iterations = 0
    for iterations in range(1, config.max_outer + 1):
        c = compute_weights(phin, gamma, sigma2, gram=G)
        sol = weighted_lasso(
            phin,
            y,
            np.sqrt(c),
            sigma2,
            lam=config.lam,
            warm_start=theta,
            tol=config.inner_tol,
            max_inner=config.max_inner,
            gram=G,
            phity=b,
        )
        if not sol.converged:
            raise ConvergenceError(
                f"inner solver exhausted {config.max_inner} sweeps"
                f" (violation {sol.violation:.3e})"
            )
        theta = sol.theta
        gamma = update_gamma(theta, c)
        value = cost(theta, gamma, phin, y, sigma2, config.lam)
        if value > trace[-1] + MONOTONICITY_SLACK:
            raise NumericalError(
                f"objective increased at iteration {iterations}:"
                f" {trace[-1]!r} -> {value!r}"
            )
        decrease = trace[-1] - value
        trace.append(value)
        if decrease <= stop_decrease:
            kres = kkt_residual(theta, gamma, phin, y, sigma2, config.lam)
            if kres <= kkt_scale:
                converged = True
                break
    if math.isinf(kres):
        kres = kkt_residual(theta, gamma, phin, y, sigma2, config.lam)

    raw_scaled = theta.copy()
    maxabs = float(np.max(np.abs(raw_scaled))) if m else 0.0
    if maxabs > 0:
        support = tuple(
            int(i)
            for i in np.nonzero(np.abs(raw_scaled) > config.prune_threshold * maxabs)[0]
        )
    else:
        support = ()

    final = np.zeros(m)
    if support:
        if config.refit_ols:
            sub = phi[:, list(support)]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            final[list(support)] = coef
        else:
            final[list(support)] = raw_scaled[list(support)] / scales[list(support)]

    return SBLResult(
        theta=final,
        raw_theta=raw_scaled / scales,
        gamma=gamma,
        support=support,
        cost_trace=tuple(trace),
        converged=converged,
        outer_iterations=iterations,
        kkt_residual=kres,
        sigma2=sigma2,
        column_names=dictionary.column_names,
    )


@dataclass(frozen=True)
class CoefficientError:
    """Relative coefficient errors over an expected support."""

    mean: float
    std: float
    missing: int
    spurious: int


def _estimated_terms(estimated) -> dict[str, complex]:
    if isinstance(estimated, Mapping):
        items = estimated.items()
    else:
        items = estimated.terms  # duck-typed report object
    return {parse_term(name).name: complex(value) for name, value in items}


def coeff_error(
    estimated,
    truth: Sequence[tuple[str, complex]],
) -> CoefficientError:
    """Mean and population std of relative errors over the true terms.

    A true term absent from the estimate counts as a relative error of 1;
    estimated terms outside the truth are tallied as ``spurious``.
    """
    est = _estimated_terms(estimated)
    errors = []
    missing = 0
    truth_names = set()
    for name, value in truth:
        canon = parse_term(name).name
        truth_names.add(canon)
        value = complex(value)
        if canon in est and est[canon] != 0:
            errors.append(abs(est[canon] - value) / abs(value))
        else:
            errors.append(1.0)
            missing += 1
    spurious = sum(1 for name, v in est.items() if name not in truth_names and v != 0)
    arr = np.asarray(errors, dtype=float)
    return CoefficientError(
        mean=float(arr.mean()) if arr.size else 0.0,
        std=float(arr.std()) if arr.size else 0.0,
        missing=missing,
        spurious=spurious,
    )
