"""Sandwich covariance and confidence intervals/regions for the estimators.

The covariance of the weighted estimator is Omega = Hinv Sigma Hinv with

    Sigma_opt = Sigma_nv - (N-n)/N * Sigma_g

for the optimally weighted (SADA) estimator, where Sigma_nv is the
labeled-sample second moment of the scores and Sigma_g is the triple product
``[mean_n s S'] [mean_N S S']^{-1} [mean_n S s']``.  For a fixed, not
necessarily optimal weight matrix W (naive, PPI, PPI++), the variance is the
quadratic form evaluated at W instead.  Per-component intervals are

    theta_j +/- sqrt(Omega_jj) * z_{1-alpha/2} / sqrt(n),

with n the labeled count.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data import Dataset
from .errors import SingularHessian, ZeroGram
from .estimators import EstimateReport, Intervals
from .models import ScoreModel
from .quantiles import chi2_quantile, normal_quantile
from .weighting import DEFAULT_RIDGE_SCALE, moment_estimates, regularize_gram

_HESSIAN_RCOND = 1e-12


@dataclass(frozen=True)
class SandwichParts:
    """Ingredients of the sandwich covariance at a given parameter value."""

    H_hat: np.ndarray
    sigma_nv: np.ndarray
    sigma_g: np.ndarray
    n: int
    N: int

    @property
    def sigma_opt(self) -> np.ndarray:
        return self.sigma_nv - (self.N - self.n) / self.N * self.sigma_g


def estimate_hessian(ds: Dataset, model: ScoreModel, theta_hat: np.ndarray) -> np.ndarray:
    """Labeled-sample average of the score Jacobian at theta_hat."""
    return np.mean(model.jacobian(ds.features[: ds.n], ds.labels, theta_hat), axis=0)


def estimate_sigma_nv(ds: Dataset, model: ScoreModel, theta_hat: np.ndarray) -> np.ndarray:
    """Labeled-sample second moment of the scores at theta_hat (uncentered)."""
    s = np.asarray(model.score(ds.features[: ds.n], ds.labels, theta_hat), dtype=float)
    return s.T @ s / ds.n


def estimate_sigma_g(
    ds: Dataset,
    model: ScoreModel,
    theta_hat: np.ndarray,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
) -> np.ndarray:
    """Efficiency-gain matrix: cross' x gram^{-1} x cross, PSD by construction.

    An identically-zero gram (all prediction columns constant) means the
    stacked scores carry no signal at all, so the gain is the zero matrix.
    """
    moments = moment_estimates(ds, model, theta_hat, centering=centering)
    try:
        gram_reg = regularize_gram(moments.gram, ridge_scale)
    except ZeroGram:
        return np.zeros((model.p, model.p))
    solved = np.linalg.pinv(gram_reg, rcond=_HESSIAN_RCOND, hermitian=True) @ moments.cross
    sigma_g = moments.cross.T @ solved
    return 0.5 * (sigma_g + sigma_g.T)


def sandwich_parts(
    ds: Dataset,
    model: ScoreModel,
    theta_hat: np.ndarray,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
) -> SandwichParts:
    """Assemble H, Sigma_nv and Sigma_g at theta_hat."""
    return SandwichParts(
        H_hat=estimate_hessian(ds, model, theta_hat),
        sigma_nv=estimate_sigma_nv(ds, model, theta_hat),
        sigma_g=estimate_sigma_g(ds, model, theta_hat, centering, ridge_scale),
        n=ds.n,
        N=ds.N,
    )


def weighted_sigma(
    ds: Dataset,
    model: ScoreModel,
    theta_hat: np.ndarray,
    W: np.ndarray,
    centering: bool = True,
) -> np.ndarray:
    """Middle matrix of the sandwich for a FIXED weight matrix W.

    Sigma(W) = Sigma_nv + N/(N-n) W'VW - C'W - W'C, with V and C the stacked
    auto- and cross-moment plug-ins.  At W = 0 this is exactly Sigma_nv.
    """
    sigma_nv = estimate_sigma_nv(ds, model, theta_hat)
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    if not W.any():
        return sigma_nv
    moments = moment_estimates(ds, model, theta_hat, centering=centering)
    quad = ds.N / (ds.N - ds.n) * W.T @ moments.gram @ W
    cross_term = moments.cross.T @ W
    sigma = sigma_nv + quad - cross_term - cross_term.T
    return 0.5 * (sigma + sigma.T)


def covariance_and_intervals(
    parts: SandwichParts,
    theta_hat: np.ndarray,
    n: int,
    level: float = 0.95,
) -> tuple[np.ndarray, Intervals, dict]:
    """Sandwich covariance Omega and per-component confidence intervals.

    Negative diagonal entries of Sigma_opt (possible in finite samples) are
    floored at zero and reported in the returned diagnostics.

    Returns:
        (Omega, Intervals, diagnostics).

    Raises:
        SingularHessian: H is not invertible at the working tolerance.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    sigma_opt, floored = _floor_diagonal(parts.sigma_opt)
    omega = _sandwich(parts.H_hat, sigma_opt)
    intervals = intervals_from_covariance(omega, theta_hat, n, level)
    diagnostics = {"floored_components": floored} if floored else {}
    return omega, intervals, diagnostics


def intervals_from_covariance(
    omega: np.ndarray, theta_hat: np.ndarray, n: int, level: float
) -> Intervals:
    """Per-component normal intervals from a sandwich covariance."""
    z = normal_quantile(0.5 + level / 2.0)
    half = z * np.sqrt(np.maximum(np.diag(omega), 0.0) / n)
    return Intervals(lower=theta_hat - half, upper=theta_hat + half, level=level)


@dataclass(frozen=True)
class EllipsoidRegion:
    """Confidence region {theta : n (theta_hat - theta)' Omega^{-1} (theta_hat - theta) <= r}."""

    center: np.ndarray
    omega_inv: np.ndarray
    radius: float
    n: int
    level: float

    def contains(self, theta: np.ndarray) -> bool:
        diff = np.asarray(theta, dtype=float) - self.center
        return float(self.n * diff @ self.omega_inv @ diff) <= self.radius


def confidence_region(
    omega: np.ndarray, theta_hat: np.ndarray, n: int, level: float = 0.95
) -> EllipsoidRegion:
    """Chi-square ellipsoidal confidence region for the full parameter vector.

    Raises:
        SingularHessian: the covariance is not invertible (e.g. a floored
            zero-variance component).
    """
    p = omega.shape[0]
    if _rcond(omega) < _HESSIAN_RCOND:
        raise SingularHessian("covariance matrix is singular; no ellipsoidal region")
    return EllipsoidRegion(
        center=np.asarray(theta_hat, dtype=float),
        omega_inv=np.linalg.inv(omega),
        radius=chi2_quantile(level, p),
        n=n,
        level=level,
    )


def attach_inference(
    report: EstimateReport,
    ds: Dataset,
    model: ScoreModel,
    level: float = 0.95,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
) -> EstimateReport:
    """Return a copy of the report with covariance and intervals filled in.

    SADA reports use the optimal-weight covariance Sigma_opt evaluated at the
    SADA estimate; all other methods use the fixed-weight quadratic form at
    their own weight matrix (zero for naive/oracle).
    """
    theta = report.theta_hat
    if report.method == "sada" and "weight_fallback" not in report.diagnostics:
        parts = sandwich_parts(ds, model, theta, centering, ridge_scale)
        omega, intervals, extra = covariance_and_intervals(parts, theta, ds.n, level)
    else:
        H = estimate_hessian(ds, model, theta)
        if _rcond(H) < _HESSIAN_RCOND:
            raise SingularHessian("estimated Hessian is singular")
        W = report.weights if report.weights is not None else np.zeros((ds.K * model.p, model.p))
        sigma, floored = _floor_diagonal(weighted_sigma(ds, model, theta, W, centering))
        omega = _sandwich(H, sigma)
        intervals = intervals_from_covariance(omega, theta, ds.n, level)
        extra = {"floored_components": floored} if floored else {}
    diagnostics = dict(report.diagnostics)
    diagnostics.update(extra)
    return replace(report, covariance=omega, intervals=intervals, diagnostics=diagnostics)


def _floor_diagonal(sigma: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Floor negative diagonal entries at zero; report which components."""
    sigma = sigma.copy()
    floored = [int(j) for j in np.flatnonzero(np.diag(sigma) < 0.0)]
    for j in floored:
        sigma[j, j] = 0.0
    return sigma, floored


def _sandwich(H: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    if _rcond(H) < _HESSIAN_RCOND:
        raise SingularHessian("estimated Hessian is singular")
    Hinv = np.linalg.inv(H)
    omega = Hinv @ sigma @ Hinv.T
    return 0.5 * (omega + omega.T)


def _rcond(M: np.ndarray) -> float:
    svals = np.linalg.svd(M, compute_uv=False)
    top = float(svals[0])
    if top == 0.0:
        return 0.0
    return float(svals[-1]) / top
