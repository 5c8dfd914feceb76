"""Post-fit inference: quantile estimates, parametric bootstrap intervals,
and Kolmogorov-Smirnov goodness of fit with CDF export."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import kolmogorov

from . import model
from .em import EmConfig, EmFit, FitFailureError, fit_em
from .sampling import SimRequest, generate_nondegenerate
from .types import CdfFamily, CensoredSample, DegenerateDataError, MixtureParams

__all__ = [
    "QuantileEstimate",
    "quantile_from_fit",
    "BootstrapConfig",
    "BootstrapResult",
    "bootstrap_ci",
    "GofMethod",
    "GofReport",
    "ks_gof",
    "ks_statistic",
    "cdf_export",
]


@dataclass(frozen=True)
class QuantileEstimate:
    q: float
    value: float
    family: CdfFamily


def quantile_from_fit(
    fit: EmFit,
    q_levels: Sequence[float],
    family: CdfFamily = CdfFamily.HAZARD_MIXTURE,
    force: bool = False,
) -> list[QuantileEstimate]:
    """Plug-in quantile estimates at each level under the chosen family."""
    if not fit.converged and not force:
        raise ValueError("fit did not converge; pass force=True to override")
    return [
        QuantileEstimate(q=float(q), value=model.quantile(fit.params, q, family),
                         family=family)
        for q in q_levels
    ]


@dataclass(frozen=True)
class BootstrapConfig:
    """Parametric bootstrap settings; refit controls the per-replicate EM."""

    B: int = 1000
    level: float = 0.95
    seed: int = 0
    refit: EmConfig = EmConfig(n_starts=4)

    def __post_init__(self):
        if self.B < 100:
            raise ValueError("B must be at least 100 for interval reporting")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile intervals per parameter, keyed like the flat vector
    (alpha, lambda1, lambda2_1.., pi_1..); replicate failures are dropped
    and counted."""

    intervals: dict
    level: float
    replicates_used: int
    replicates_dropped: int
    unreliable: bool
    estimates: np.ndarray

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "intervals": {k: list(v) for k, v in self.intervals.items()},
            "replicates_used": self.replicates_used,
            "replicates_dropped": self.replicates_dropped,
            "unreliable": self.unreliable,
        }


def _param_names(m: int) -> list[str]:
    return (
        ["alpha", "lambda1"]
        + [f"lambda2_{j + 1}" for j in range(m)]
        + [f"pi_{j + 1}" for j in range(m)]
    )


def bootstrap_ci(
    sample: CensoredSample, fit: EmFit, cfg: BootstrapConfig
) -> BootstrapResult:
    """Parametric bootstrap: simulate from the fitted parameters with the
    original (n, r, tau), refit, and take percentile intervals."""
    if not fit.converged:
        raise ValueError("fit did not converge; bootstrap refuses to resample")
    m = fit.params.m
    rows = []
    dropped = 0
    for b in range(cfg.B):
        req = SimRequest(
            params=fit.params, n=sample.n, r=sample.r, seed=cfg.seed,
            replication_index=b,
        )
        try:
            drawn, _ = generate_nondegenerate(req)
            refit = fit_em(drawn.sample, cfg.refit)
        except (DegenerateDataError, FitFailureError, RuntimeError):
            dropped += 1
            continue
        if not refit.converged:
            dropped += 1
            continue
        rows.append(refit.params.as_array())
    estimates = np.array(rows)
    lo_q = (1.0 - cfg.level) / 2.0
    lower = np.quantile(estimates, lo_q, axis=0)
    upper = np.quantile(estimates, 1.0 - lo_q, axis=0)
    intervals = {
        name: (float(lo), float(hi))
        for name, lo, hi in zip(_param_names(m), lower, upper)
    }
    return BootstrapResult(
        intervals=intervals,
        level=cfg.level,
        replicates_used=len(rows),
        replicates_dropped=dropped,
        unreliable=dropped > 0.2 * cfg.B,
        estimates=estimates,
    )


class GofMethod(enum.Enum):
    ASYMPTOTIC_KOLMOGOROV = "asymptotic"
    PARAMETRIC_BOOTSTRAP = "bootstrap"


@dataclass(frozen=True)
class GofReport:
    ks_statistic: float
    p_value: float
    points_used: int
    method: GofMethod

    def to_dict(self) -> dict:
        return {
            "ks_statistic": self.ks_statistic,
            "p_value": self.p_value,
            "points_used": self.points_used,
            "method": self.method.value,
        }


def ks_statistic(
    sample: CensoredSample,
    params: MixtureParams,
    family: CdfFamily = CdfFamily.HAZARD_MIXTURE,
    scale_by_r: bool = False,
) -> float:
    """Sup distance over the observed order statistics.

    The empirical step heights use i/n by default (the censored units count
    toward the denominator); scale_by_r switches to i/r.
    """
    denom = sample.r if scale_by_r else sample.n
    i = np.arange(1, sample.r + 1)
    f = model.cdf(params, sample.times, family)
    d_plus = np.max(i / denom - f)
    d_minus = np.max(f - (i - 1) / denom)
    return float(max(d_plus, d_minus))


def ks_gof(
    sample: CensoredSample,
    params: MixtureParams,
    family: CdfFamily = CdfFamily.HAZARD_MIXTURE,
    method: GofMethod = GofMethod.ASYMPTOTIC_KOLMOGOROV,
    scale_by_r: bool = False,
    B: int = 1000,
    seed: int = 0,
) -> GofReport:
    """KS goodness of fit against the chosen family's CDF."""
    if sample.r < 5:
        raise ValueError("need at least five observed failures for the KS test")
    d = ks_statistic(sample, params, family, scale_by_r)
    n_eff = sample.r if scale_by_r else sample.n
    if method is GofMethod.ASYMPTOTIC_KOLMOGOROV:
        p = float(kolmogorov(np.sqrt(n_eff) * d))
    else:
        exceed = 0
        used = 0
        for b in range(B):
            req = SimRequest(params=params, n=sample.n, r=sample.r, seed=seed,
                             replication_index=b)
            try:
                drawn, _ = generate_nondegenerate(req)
            except RuntimeError:
                continue
            used += 1
            if ks_statistic(drawn.sample, params, family, scale_by_r) >= d:
                exceed += 1
        p = (exceed + 1) / (used + 1)
    return GofReport(
        ks_statistic=d, p_value=float(p), points_used=sample.r, method=method
    )


def cdf_export(
    sample: CensoredSample,
    params: MixtureParams,
    family: CdfFamily = CdfFamily.HAZARD_MIXTURE,
    grid_points: int = 200,
) -> list[tuple]:
    """Rows of (t, empirical_cdf, fitted_cdf): one row per observed order
    statistic plus a fitted-only grid up to 1.05 * the last observation.
    Empirical entries are blank (None) on grid rows."""
    rows = []
    f_obs = model.cdf(params, sample.times, family)
    for i, (t, f) in enumerate(zip(sample.times, f_obs), start=1):
        rows.append((float(t), i / sample.n, float(f)))
    top = 1.05 * sample.censor_time
    grid = np.linspace(top / grid_points, top, grid_points)
    f_grid = model.cdf(params, grid, family)
    for t, f in zip(grid, f_grid):
        rows.append((float(t), None, float(f)))
    rows.sort(key=lambda row: row[0])
    return rows
