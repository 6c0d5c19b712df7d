"""Monte Carlo replication harness for comparing the estimators.

Every replicate draws its own RNG substream from ``SeedSequence(seed,
spawn_key=(rep_index,))``, so results are bit-identical no matter how the
replicates are distributed over worker processes.  Aggregation is a single
deterministic reduction over rep-indexed arrays.

Method tokens: ``naive``, ``sada``, ``oracle``, ``ppi:<k>``, ``ppi_pp:<k>``
with 1-based prediction column k (bare ``ppi`` / ``ppi_pp`` mean column 1).
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset
from .errors import ConfigError, SadaError
from .estimators import (
    naive_estimate,
    oracle_estimate,
    ppi_estimate,
    ppi_pp_estimate,
    sada_estimate,
)
from .inference import attach_inference
from .models import ScoreModel, mean_model, ols_model
from .weighting import DEFAULT_RIDGE_SCALE

DEFAULT_METHODS = ("naive", "ppi:1", "ppi:2", "ppi_pp:1", "ppi_pp:2", "sada")


@dataclass(frozen=True)
class SyntheticConfig:
    """Design of the synthetic two-prediction study.

    Y ~ Normal(theta_star, 1); predictions Yhat1 = gamma*Y + (1-gamma)*eps1
    and Yhat2 = (1-gamma)*Y + gamma*eps2 with independent standard normal
    noise.  The first n of N rows are labeled and the single feature column
    is the constant 1.
    """

    theta_star: float = 0.5
    N: int = 200
    n: int = 60
    gamma: float = 0.5
    reps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if not 1 <= self.n < self.N:
            raise ConfigError(f"need 1 <= n < N, got n={self.n}, N={self.N}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")


@dataclass(frozen=True)
class ConditionalMeanConfig:
    """Design for the efficiency-bound check: X ~ N(0,1), Y = X + noise,
    Yhat1 = X (the conditional mean), Yhat2 = independent noise; estimand E[Y]."""

    N: int = 200
    n: int = 60
    reps: int = 2000
    seed: int = 0
    noise_sd: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n < self.N:
            raise ConfigError(f"need 1 <= n < N, got n={self.n}, N={self.N}")


@dataclass(frozen=True)
class OlsCoverageConfig:
    """Two-feature linear model: x = (1, z), y = x'theta_star + noise, with the
    synthetic-style prediction pair at mixing parameter gamma.

    Defaults use a larger design than the mean study: the matrix-weight
    plug-in has K*p*p = 8 free entries, so the asymptotic intervals need a
    few hundred labeled rows to be in regime.
    """

    theta_star: tuple[float, float] = (1.0, 0.5)
    N: int = 1000
    n: int = 300
    gamma: float = 0.5
    reps: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.n < self.N:
            raise ConfigError(f"need 1 <= n < N, got n={self.n}, N={self.N}")


def _rng_for(seed: int, rep_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep_index,)))


def generate_synthetic(cfg: SyntheticConfig, rep_index: int) -> tuple[Dataset, np.ndarray]:
    """One synthetic replicate; deterministic given (cfg.seed, rep_index)."""
    rng = _rng_for(cfg.seed, rep_index)
    y = cfg.theta_star + rng.standard_normal(cfg.N)
    eps1 = rng.standard_normal(cfg.N)
    eps2 = rng.standard_normal(cfg.N)
    yhat1 = cfg.gamma * y + (1.0 - cfg.gamma) * eps1
    yhat2 = (1.0 - cfg.gamma) * y + cfg.gamma * eps2
    ds = Dataset.from_arrays(
        features=np.ones((cfg.N, 1)),
        labels=y[: cfg.n],
        predictions=np.column_stack([yhat1, yhat2]),
    )
    return ds, y


def generate_conditional_mean(cfg: ConditionalMeanConfig, rep_index: int) -> tuple[Dataset, np.ndarray]:
    rng = _rng_for(cfg.seed, rep_index)
    x = rng.standard_normal(cfg.N)
    y = x + cfg.noise_sd * rng.standard_normal(cfg.N)
    noise = rng.standard_normal(cfg.N)
    ds = Dataset.from_arrays(
        features=x[:, None],
        labels=y[: cfg.n],
        predictions=np.column_stack([x, noise]),
    )
    return ds, y


def generate_ols(cfg: OlsCoverageConfig, rep_index: int) -> tuple[Dataset, np.ndarray]:
    rng = _rng_for(cfg.seed, rep_index)
    z = rng.standard_normal(cfg.N)
    X = np.column_stack([np.ones(cfg.N), z])
    y = X @ np.asarray(cfg.theta_star) + rng.standard_normal(cfg.N)
    eps1 = rng.standard_normal(cfg.N)
    eps2 = rng.standard_normal(cfg.N)
    yhat1 = cfg.gamma * y + (1.0 - cfg.gamma) * eps1
    yhat2 = (1.0 - cfg.gamma) * y + cfg.gamma * eps2
    ds = Dataset.from_arrays(
        features=X, labels=y[: cfg.n], predictions=np.column_stack([yhat1, yhat2])
    )
    return ds, y


_STUDIES = {
    "synthetic": generate_synthetic,
    "conditional_mean": generate_conditional_mean,
    "ols": generate_ols,
}


def _model_for(kind: str) -> ScoreModel:
    return ols_model(2) if kind == "ols" else mean_model()


def _theta_star_for(kind: str, cfg) -> np.ndarray:
    if kind == "synthetic":
        return np.array([cfg.theta_star])
    if kind == "conditional_mean":
        return np.array([0.0])
    return np.asarray(cfg.theta_star, dtype=float)


def parse_method(token: str) -> tuple[str, int | None]:
    """Split a method token into (tag, prediction column or None)."""
    name, _, col = token.partition(":")
    name = name.strip()
    if name in ("naive", "sada", "oracle"):
        if col:
            raise ConfigError(f"method {name!r} takes no column index: {token!r}")
        return name, None
    if name in ("ppi", "ppi_pp"):
        if not col:
            return name, 1
        try:
            k = int(col)
        except ValueError:
            raise ConfigError(f"bad column index in method token {token!r}") from None
        if k < 1:
            raise ConfigError(f"column index must be >= 1 in {token!r}")
        return name, k
    raise ConfigError(f"unknown method {token!r}")


@dataclass(frozen=True)
class SimStudyResult:
    """Aggregated Monte Carlo results for one study configuration.

    Per-method arrays are indexed by parameter component; ``estimates``
    carries the raw per-replication estimates for replay and plotting, and
    ``rep_seeds`` the substream spawn keys (one per replicate).
    """

    kind: str
    methods: tuple[str, ...]
    theta_star: np.ndarray
    reps: int
    seed: int
    estimates: dict = field(repr=False, default_factory=dict)
    sd: dict = field(default_factory=dict)
    mean: dict = field(default_factory=dict)
    bias: dict = field(default_factory=dict)
    rel_efficiency: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    rep_seeds: tuple = ()


def _run_one_rep(kind: str, cfg, methods: Sequence[str], level: float,
                 centering: bool, ridge_scale: float, rep: int, strict: bool):
    """Run every method on one replicate; returns {token: (theta, lo, hi) | None}."""
    ds, truth = _STUDIES[kind](cfg, rep)
    model = _model_for(kind)
    out = {}
    for token in methods:
        tag, k = parse_method(token)
        try:
            if tag == "naive":
                rep_out = naive_estimate(ds, model)
            elif tag == "ppi":
                rep_out = ppi_estimate(ds, model, k)
            elif tag == "ppi_pp":
                rep_out = ppi_pp_estimate(ds, model, k, centering=centering, ridge_scale=ridge_scale)
            elif tag == "sada":
                rep_out = sada_estimate(ds, model, centering=centering, ridge_scale=ridge_scale)
            else:
                rep_out = oracle_estimate(ds, truth, model)
            if tag == "oracle":
                out[token] = (rep_out.theta_hat, None, None)
            else:
                rep_out = attach_inference(rep_out, ds, model, level, centering, ridge_scale)
                out[token] = (rep_out.theta_hat, rep_out.intervals.lower, rep_out.intervals.upper)
        except SadaError:
            if strict:
                raise
            out[token] = None
    return out


def _run_chunk(args):
    kind, cfg, methods, level, centering, ridge_scale, rep_indices, strict = args
    return [
        _run_one_rep(kind, cfg, methods, level, centering, ridge_scale, rep, strict)
        for rep in rep_indices
    ]


def _run_study(
    kind: str,
    cfg,
    methods: Sequence[str],
    level: float,
    centering: bool,
    ridge_scale: float,
    workers: int,
    strict: bool,
) -> SimStudyResult:
    tokens = list(dict.fromkeys(methods))
    if "naive" not in tokens:
        tokens = ["naive"] + tokens  # baseline for relative efficiencies
    for token in tokens:
        parse_method(token)
    theta_star = _theta_star_for(kind, cfg)
    p = theta_star.shape[0]
    reps = cfg.reps

    rep_rows: list = [None] * reps
    if workers <= 1:
        rep_rows = _run_chunk((kind, cfg, tokens, level, centering, ridge_scale, range(reps), strict))
    else:
        chunks = [c for c in np.array_split(np.arange(reps), workers * 4) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = {
                pool.submit(
                    _run_chunk,
                    (kind, cfg, tokens, level, centering, ridge_scale, chunk.tolist(), strict),
                ): chunk
                for chunk in chunks
            }
            for job, chunk in jobs.items():
                for rep, row in zip(chunk.tolist(), job.result()):
                    rep_rows[rep] = row

    estimates = {t: np.full((reps, p), np.nan) for t in tokens}
    covered = {t: np.full((reps, p), np.nan) for t in tokens}
    failures = {t: 0 for t in tokens}
    for rep, row in enumerate(rep_rows):
        for token in tokens:
            got = row[token]
            if got is None:
                failures[token] += 1
                continue
            theta, lo, hi = got
            estimates[token][rep] = theta
            if lo is not None:
                covered[token][rep] = (lo <= theta_star) & (theta_star <= hi)

    sd, mean, bias, rel_eff, coverage = {}, {}, {}, {}, {}
    with np.errstate(invalid="ignore", divide="ignore"):
        for token in tokens:
            est = estimates[token]
            ok = ~np.isnan(est[:, 0])
            mean[token] = est[ok].mean(axis=0) if ok.any() else np.full(p, np.nan)
            sd[token] = est[ok].std(axis=0, ddof=0) if ok.any() else np.full(p, np.nan)
            bias[token] = mean[token] - theta_star
            cov_ok = ~np.isnan(covered[token][:, 0])
            coverage[token] = (
                covered[token][cov_ok].mean(axis=0) if cov_ok.any() else np.full(p, np.nan)
            )
        for token in tokens:
            rel_eff[token] = sd[token] / sd["naive"]

    return SimStudyResult(
        kind=kind,
        methods=tuple(tokens),
        theta_star=theta_star,
        reps=reps,
        seed=cfg.seed,
        estimates=estimates,
        sd=sd,
        mean=mean,
        bias=bias,
        rel_efficiency=rel_eff,
        coverage=coverage,
        failures=failures,
        rep_seeds=tuple(range(reps)),
    )


def run_replications(
    cfg: SyntheticConfig,
    methods: Sequence[str] = DEFAULT_METHODS,
    level: float = 0.95,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
    workers: int = 1,
    strict: bool = False,
) -> SimStudyResult:
    """Run the synthetic study at one gamma and aggregate across replicates.

    The naive method is always included as the relative-efficiency baseline.
    Per-replicate estimator failures are excluded and counted unless
    ``strict`` is set, in which case they raise.
    """
    if not methods:
        raise ConfigError("methods must be nonempty")
    return _run_study("synthetic", cfg, methods, level, centering, ridge_scale, workers, strict)


@dataclass(frozen=True)
class CurveRow:
    """One (gamma, method) cell of the efficiency table."""

    gamma: float
    method: str
    rel_efficiency: float
    coverage: float
    sd: float
    mean: float
    bias: float
    failures: int


def efficiency_curve(
    cfg_base: SyntheticConfig,
    gammas: Iterable[float],
    methods: Sequence[str] = DEFAULT_METHODS,
    level: float = 0.95,
    centering: bool = True,
    ridge_scale: float = DEFAULT_RIDGE_SCALE,
    workers: int = 1,
    strict: bool = False,
) -> list[CurveRow]:
    """One run_replications per gamma, emitted as a long-format table."""
    gammas = list(gammas)
    if not gammas:
        raise ConfigError("gamma grid must be nonempty")
    rows: list[CurveRow] = []
    for gamma in gammas:
        res = run_replications(
            replace(cfg_base, gamma=float(gamma)),
            methods,
            level=level,
            centering=centering,
            ridge_scale=ridge_scale,
            workers=workers,
            strict=strict,
        )
        for token in res.methods:
            rows.append(
                CurveRow(
                    gamma=float(gamma),
                    method=token,
                    rel_efficiency=float(res.rel_efficiency[token][0]),
                    coverage=float(res.coverage[token][0]),
                    sd=float(res.sd[token][0]),
                    mean=float(res.mean[token][0]),
                    bias=float(res.bias[token][0]),
                    failures=res.failures[token],
                )
            )
    return rows


def conditional_mean_study(
    cfg: ConditionalMeanConfig,
    methods: Sequence[str] = ("naive", "sada"),
    level: float = 0.95,
    workers: int = 1,
    strict: bool = False,
) -> SimStudyResult:
    """Monte Carlo check of the efficiency bound under a conditional-mean prediction."""
    return _run_study("conditional_mean", cfg, methods, level, True, DEFAULT_RIDGE_SCALE, workers, strict)


def ols_coverage_study(
    cfg: OlsCoverageConfig,
    methods: Sequence[str] = ("naive", "sada"),
    level: float = 0.95,
    workers: int = 1,
    strict: bool = False,
) -> SimStudyResult:
    """Coverage study for the linear-regression coefficients."""
    return _run_study("ols", cfg, methods, level, True, DEFAULT_RIDGE_SCALE, workers, strict)
