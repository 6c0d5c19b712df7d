"""The four estimators (naive, PPI, PPI++, SADA) plus the oracle benchmark.

All of them are roots of a weighted estimating equation

    mean_L s(x_i, y_i; theta)
        + W' [ mean_U S(x_i, yhat_i; theta) - mean_L S(x_i, yhat_i; theta) ] = 0

where S stacks the score evaluated at each prediction column, L/U are the
labeled/unlabeled rows and W is a (K*p, p) weight matrix:

* naive:  W = 0
* PPI:    W = identity in block k, zero elsewhere
* PPI++:  W = omega * identity in block k, omega tuned to minimize the trace
          of the estimated asymptotic covariance
* SADA:   W = (N-n)/N times the general stacked-score plug-in

Every estimator is a pure function of (dataset, config) and safe to call
from concurrent replication workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import Dataset, stacked_score_matrix
from .errors import SingularGram
from .models import ScoreModel, SolverConfig, solve_estimating_equation, solve_score_root
from .weighting import (
    DEFAULT_RIDGE_SCALE,
    estimate_general_weights,
    moment_estimates,
    regularize_gram,
)

METHOD_TAGS = ("naive", "ppi", "ppi_pp", "sada", "oracle")

#: Reciprocal condition threshold below which a Hessian is treated as degenerate.
_HESSIAN_RCOND = 1e-12


@dataclass(frozen=True)
class Intervals:
    """Per-component confidence intervals at a common level."""

    lower: np.ndarray
    upper: np.ndarray
    level: float


@dataclass(frozen=True)
class EstimateReport:
    """Point estimate plus optional weights, covariance and intervals.

    ``diagnostics`` records the conventions used (centering, ridge scale,
    weight scaling), solver iteration counts, and any fallback events.
    """

    theta_hat: np.ndarray
    method: str
    weights: Optional[np.ndarray] = None
    covariance: Optional[np.ndarray] = None
    intervals: Optional[Intervals] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.theta_hat)):
            raise ValueError("estimate is not finite")


def _column_view(ds: Dataset, k: int) -> Dataset:
    """Dataset restricted to prediction column k (1-based); skips revalidation."""
    if not 1 <= k <= ds.K:
        raise ValueError(f"prediction index k={k} outside 1..{ds.K}")
    return Dataset(
        features=ds.features,
        labels=ds.labels,
        predictions=ds.predictions[:, [k - 1]],
        _validated=True,
    )


def _embed_block(ds: Dataset, p: int, k: int, block: np.ndarray) -> np.ndarray:
    """Place a (p, p) block at position k (1-based) of an otherwise-zero weight matrix."""
    W = np.zeros((ds.K * p, p))
    W[(k - 1) * p: k * p, :] = block
    return W


def solve_weighted(
    ds: Dataset,
    model: ScoreModel,
    W: np.ndarray,
    cfg: SolverConfig | None = None,
    theta0: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Solve the weighted estimating equation for a fixed weight matrix W.

    W may be given as a (K*p, p) matrix or, when p = 1, a length-K vector.
    With W = 0 this reproduces the naive estimator; with K = 1 and W = I it
    reproduces PPI.

    Returns:
        (theta_hat, iterations).
    """
    W = np.asarray(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    p = model.p
    if W.shape != (ds.K * p, p):
        raise ValueError(f"weight matrix shape {W.shape} != {(ds.K * p, p)}")
    n = ds.n
    X_lab, y_lab = ds.features[:n], ds.labels

    if not W.any():
        return solve_score_root(model, X_lab, y_lab, cfg, theta0)

    def residual(theta):
        r = np.mean(model.score(X_lab, y_lab, theta), axis=0)
        S = stacked_score_matrix(model, ds.features, ds.predictions, theta)
        diff = S[n:].mean(axis=0) - S[:n].mean(axis=0)
        return r + W.T @ diff

    def jac(theta):
        J = np.mean(model.jacobian(X_lab, y_lab, theta), axis=0)
        J_diff = np.empty((ds.K * p, p))
        for k in range(ds.K):
            Jk = np.asarray(model.jacobian(ds.features, ds.predictions[:, k], theta))
            J_diff[k * p:(k + 1) * p] = Jk[n:].mean(axis=0) - Jk[:n].mean(axis=0)
        return J + W.T @ J_diff

    return solve_estimating_equation(residual, jac, theta0 if theta0 is not None else np.zeros(p), cfg)


def naive_estimate(ds: Dataset, model: ScoreModel, cfg: SolverConfig | None = None) -> EstimateReport:
    """Labeled-data-only estimator: root of the plain sample score equation."""
    theta, iters = solve_score_root(model, ds.features[: ds.n], ds.labels, cfg)
    return EstimateReport(
        theta_hat=theta, method="naive", diagnostics={"solver_iterations": iters}
    )


def oracle_estimate(
    ds: Dataset, truth: np.ndarray, model: ScoreModel, cfg: SolverConfig | None = None
) -> EstimateReport:
    """Infeasible benchmark using the true labels of all N rows (simulation use)."""
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (ds.N,):
        raise ValueError(f"truth must have length N={ds.N}")
    if not np.all(np.isfinite(truth)):
        raise ValueError("truth contains non-finite values")
    theta, iters = solve_score_root(model, ds.features, truth, cfg)
    return EstimateReport(
        theta_hat=theta, method="oracle", diagnostics={"solver_iterations": iters}
    )


def ppi_estimate(
    ds: Dataset, model: ScoreModel, k: int = 1, cfg: SolverConfig | None = None
) -> EstimateReport:
    """Prediction-powered estimator with identity weight on prediction column k.

    For the mean model this is
    ``mean(y_L) + mean(yhat_k on U) - mean(yhat_k on L)``.  Columns beyond the
    first are handled per-column by analogy (recorded in diagnostics).
    """
    sub = _column_view(ds, k)
    theta, iters = solve_weighted(sub, model, np.eye(model.p), cfg)
    return EstimateReport(
        theta_hat=theta,
        method="ppi",
        weights=_embed_block(ds, model.p, k, np.eye(model.p)),
        diagnostics={"solver_iterations": iters, "prediction_column": k},
    )


def ppi_pp_estimate(
    ds: Dataset,
    model: ScoreModel,
    k: int = 1,
    cfg: SolverConfig | None = None,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
) -> EstimateReport:
    """PPI with a scalar tuning weight on prediction column k.

    The scalar minimizes the trace of the estimated asymptotic covariance,

        omega = (N-n)/N * tr(Hinv C Hinv) / tr(Hinv V Hinv),

    with C and V the cross- and auto-moment plug-ins of column k's score and
    Hinv the inverse estimated Hessian, all at the naive pilot.  A degenerate
    variance or Hessian yields omega = 0, i.e. the naive estimator.  For
    p = 1 this coincides with SADA restricted to column k.
    """
    sub = _column_view(ds, k)
    pilot, _ = solve_score_root(model, ds.features[: ds.n], ds.labels, cfg)
    p = model.p
    diagnostics: dict = {
        "prediction_column": k,
        "centering": centering,
        "ridge_scale": ridge_scale,
    }

    omega = 0.0
    H = np.mean(model.jacobian(ds.features[: ds.n], ds.labels, pilot), axis=0)
    if _rcond(H) < _HESSIAN_RCOND:
        diagnostics["degenerate"] = "singular_hessian"
    else:
        Hinv = np.linalg.inv(H)
        try:
            moments = moment_estimates(sub, model, pilot, centering=centering)
            gram_reg = regularize_gram(moments.gram, ridge_scale)
            denom = float(np.trace(Hinv @ gram_reg @ Hinv))
            numer = float(np.trace(Hinv @ moments.cross @ Hinv))
            if denom <= 0.0 or not np.isfinite(denom) or not np.isfinite(numer):
                diagnostics["degenerate"] = "nonpositive_variance"
            else:
                omega = (ds.N - ds.n) / ds.N * numer / denom
        except SingularGram:
            diagnostics["degenerate"] = "singular_gram"

    theta, iters = solve_weighted(sub, model, omega * np.eye(p), cfg, theta0=pilot)
    diagnostics["solver_iterations"] = iters
    diagnostics["omega"] = omega
    return EstimateReport(
        theta_hat=theta,
        method="ppi_pp",
        weights=_embed_block(ds, p, k, omega * np.eye(p)),
        diagnostics=diagnostics,
    )


def sada_estimate(
    ds: Dataset,
    model: ScoreModel,
    cfg: SolverConfig | None = None,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
    second_pass: bool = False,
) -> EstimateReport:
    """Safe-and-adaptive aggregation across all prediction columns.

    Pipeline: (1) naive pilot estimate, (2) stacked-score weight plug-in at
    the pilot, scaled by (N-n)/N to the population convention, (3) root of
    the weighted estimating equation.  Weight-estimation failure degrades to
    the naive estimate with a diagnostic instead of raising.

    Args:
        second_pass: re-estimate the weights at the first-pass solution and
            solve once more (off by default; the standard protocol is a
            single pass).
    """
    pilot, pilot_iters = solve_score_root(model, ds.features[: ds.n], ds.labels, cfg)
    p = model.p
    scale = (ds.N - ds.n) / ds.N
    diagnostics: dict = {
        "centering": centering,
        "ridge_scale": ridge_scale,
        "pilot_iterations": pilot_iters,
        "weight_scale": scale,
    }

    try:
        W = scale * estimate_general_weights(
            ds, model, pilot, centering=centering, ridge_scale=ridge_scale
        )
    except SingularGram as exc:
        diagnostics["weight_fallback"] = f"{type(exc).__name__}: {exc}"
        diagnostics["solver_iterations"] = 0
        return EstimateReport(
            theta_hat=pilot,
            method="sada",
            weights=np.zeros((ds.K * p, p)),
            diagnostics=diagnostics,
        )

    theta, iters = solve_weighted(ds, model, W, cfg, theta0=pilot)
    if second_pass:
        W = scale * estimate_general_weights(
            ds, model, theta, centering=centering, ridge_scale=ridge_scale
        )
        theta, iters = solve_weighted(ds, model, W, cfg, theta0=theta)
        diagnostics["second_pass"] = True
    diagnostics["solver_iterations"] = iters
    return EstimateReport(theta_hat=theta, method="sada", weights=W, diagnostics=diagnostics)


def _rcond(M: np.ndarray) -> float:
    svals = np.linalg.svd(M, compute_uv=False)
    top = float(svals[0])
    if top == 0.0:
        return 0.0
    return float(svals[-1]) / top
