"""Distribution family of the heterogeneous step-stress Weibull model.

Hazard, cumulative hazard, CDF/PDF/survival under both stage-2 marginals,
closed-form and root-found quantiles, observed-data log-likelihoods in both
formulations, and analytic score functions for the aggregate-hazard
log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .types import CdfFamily, CensoredSample, DegenerateDataError, MixtureParams

__all__ = [
    "DistributionPoint",
    "distribution_at",
    "population_cdf",
    "cdf",
    "quantile",
    "truncated_component",
    "loglik_mixture",
    "loglik_eq8",
    "score_eq8",
]

_QUANTILE_ATOL = 1e-10
_MAX_BISECT = 200


def _pow(t, alpha):
    """t**alpha via exp(alpha*log t), guarding t = 0."""
    t = np.asarray(t, dtype=float)
    out = np.where(t > 0, np.exp(alpha * np.log(np.where(t > 0, t, 1.0))), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DistributionPoint:
    hazard: float
    cum_hazard: float
    cdf_hazard_mixture: float
    pdf_hazard_mixture: float
    survival_hazard_mixture: float


def distribution_at(params: MixtureParams, t: float) -> DistributionPoint:
    """Evaluate hazard, cumulative hazard, CDF, PDF and survival at t under
    the aggregate-hazard (hazard-mixture) formulation."""
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    a, l1, tau = params.alpha, params.lambda1, params.tau
    l2b = params.lambda2_bar
    ta = _pow(t, a)
    if t <= tau:
        hazard = a * l1 * _pow(t, a - 1.0)
        cum = l1 * ta
    else:
        hazard = a * _pow(t, a - 1.0) * l2b
        cum = l1 * _pow(tau, a) + l2b * (ta - _pow(tau, a))
    surv = np.exp(-cum)
    point = DistributionPoint(
        hazard=float(hazard),
        cum_hazard=float(cum),
        cdf_hazard_mixture=float(1.0 - surv),
        pdf_hazard_mixture=float(hazard * surv),
        survival_hazard_mixture=float(surv),
    )
    if not all(np.isfinite(v) for v in (point.hazard, point.cum_hazard)):
        raise FloatingPointError(f"non-finite distribution value at t={t}: {point}")
    return point


def population_cdf(params: MixtureParams, t) -> float:
    """CDF of the subgroup-marginal (population-mixture) formulation.

    For t > tau the survival is exp(-lambda1 tau^a) * sum_j pi_j
    exp(-lambda2j (t^a - tau^a)); below tau it coincides with the
    hazard-mixture CDF.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    a, l1, tau = params.alpha, params.lambda1, params.tau
    ta = _pow(t, a)
    taua = _pow(tau, a)
    lam2 = np.array(params.lambda2)
    pi = np.array(params.pi)
    excess = np.maximum(ta - taua, 0.0)
    surv2 = np.exp(-l1 * taua) * np.exp(-np.multiply.outer(excess, lam2)) @ pi
    out = np.where(t <= tau, 1.0 - np.exp(-l1 * ta), 1.0 - surv2)
    return out if out.ndim else float(out)


def cdf(params: MixtureParams, t, family: CdfFamily = CdfFamily.HAZARD_MIXTURE):
    """CDF at t under the chosen stage-2 marginal (vectorized in t)."""
    if family is CdfFamily.POPULATION_MIXTURE:
        return population_cdf(params, t)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    a, l1, tau = params.alpha, params.lambda1, params.tau
    ta = _pow(t, a)
    taua = _pow(tau, a)
    cum = np.where(t <= tau, l1 * ta, l1 * taua + params.lambda2_bar * (ta - taua))
    out = 1.0 - np.exp(-cum)
    return out if out.ndim else float(out)


def quantile(
    params: MixtureParams, q: float, family: CdfFamily = CdfFamily.HAZARD_MIXTURE
) -> float:
    """Solve cdf(t) = q for t.

    Hazard-mixture: closed-form piecewise inversion. Population-mixture:
    bracketed bisection on the monotone CDF to 1e-10 absolute in t.
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    a, l1, tau = params.alpha, params.lambda1, params.tau
    taua = _pow(tau, a)
    h = -np.log1p(-q)  # target cumulative hazard
    g_tau = 1.0 - np.exp(-l1 * taua)
    if q <= g_tau:
        return float((h / l1) ** (1.0 / a))
    if family is CdfFamily.HAZARD_MIXTURE:
        return float((taua + (h - l1 * taua) / params.lambda2_bar) ** (1.0 / a))
    # bisection on population_cdf; bracket above tau by doubling
    lo, hi = tau, tau + 1.0
    for _ in range(200):
        if population_cdf(params, hi) >= q:
            break
        hi = tau + 2.0 * (hi - tau)
    else:
        raise FloatingPointError("failed to bracket population quantile")
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if population_cdf(params, mid) < q:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _QUANTILE_ATOL:
            break
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TruncatedComponent:
    pdf: float
    survival: float


def truncated_component(
    alpha: float, lam: float, tau: float, t: float
) -> TruncatedComponent:
    """Density and survival of a single subgroup's left-truncated Weibull
    lifetime beyond tau."""
    if t <= tau:
        raise ValueError(f"t must exceed tau = {tau}, got {t}")
    excess = _pow(t, alpha) - _pow(tau, alpha)
    surv = np.exp(-lam * excess)
    pdf = alpha * lam * _pow(t, alpha - 1.0) * surv
    return TruncatedComponent(pdf=float(pdf), survival=float(surv))


def _check_stage2(params: MixtureParams, sample: CensoredSample):
    if params.m > 1 and sample.n1 >= sample.r:
        raise DegenerateDataError(
            "no stage-2 failures observed; mixture likelihood is degenerate"
        )


def _stage1_loglik(params: MixtureParams, sample: CensoredSample) -> float:
    """Shared stage-1 terms: density of the n1 early failures plus the
    survival-to-tau factor of the remaining units."""
    a, l1, tau = params.alpha, params.lambda1, params.tau
    t1 = sample.stage1_times
    n1 = sample.n1
    return (
        n1 * (np.log(a) + np.log(l1))
        + (a - 1.0) * np.sum(np.log(t1))
        - l1 * np.sum(_pow(t1, a))
        - (sample.n - n1) * l1 * _pow(tau, a)
    )


def loglik_mixture(params: MixtureParams, sample: CensoredSample) -> float:
    """Observed-data log-likelihood under the subgroup-marginal model: the
    objective the EM algorithm ascends.

    Stage-2 observed failures contribute log sum_j pi_j f_trunc(t_i); the
    n - r censored units contribute log sum_j pi_j S_trunc(t_r) each.
    """
    _check_stage2(params, sample)
    a, tau = params.alpha, params.tau
    taua = _pow(tau, a)
    lam2 = np.array(params.lambda2)
    logpi = np.log(params.pi)
    t2 = sample.stage2_times
    out = _stage1_loglik(params, sample)
    if t2.size:
        excess = _pow(t2, a) - taua
        # log f_trunc per (obs, component), mixed in log space
        logf = (
            np.log(a)
            + np.log(lam2)[None, :]
            + (a - 1.0) * np.log(t2)[:, None]
            - np.outer(excess, lam2)
        )
        out += float(np.sum(logsumexp(logf + logpi[None, :], axis=1)))
    n_cens = sample.n - sample.r
    if n_cens:
        excess_r = _pow(sample.censor_time, a) - taua
        logS = -lam2 * excess_r
        out += n_cens * float(logsumexp(logS + logpi))
    return float(out)


def _eq8_pieces(params: MixtureParams, sample: CensoredSample):
    a, l1, tau = params.alpha, params.lambda1, params.tau
    taua = _pow(tau, a)
    t1, t2 = sample.stage1_times, sample.stage2_times
    n, r, n1 = sample.n, sample.r, sample.n1
    # stage-1 exposure and the stage-2 aggregate exposure beyond tau
    expo1 = np.sum(_pow(t1, a)) + (n - n1) * taua
    expo2 = (
        np.sum(_pow(t2, a)) + (n - r) * _pow(sample.censor_time, a) - (n - n1) * taua
    )
    return taua, expo1, expo2


def loglik_eq8(params: MixtureParams, sample: CensoredSample) -> float:
    """Aggregate-hazard observed-data log-likelihood: depends on the stage-2
    mixture only through the weighted rate lambda2_bar, so it carries a flat
    ridge in (pi, lambda2) at fixed lambda2_bar."""
    _check_stage2(params, sample)
    a, l1 = params.alpha, params.lambda1
    l2b = params.lambda2_bar
    n1, r = sample.n1, sample.r
    _, expo1, expo2 = _eq8_pieces(params, sample)
    return float(
        n1 * np.log(l1)
        + r * np.log(a)
        + (a - 1.0) * np.sum(np.log(sample.times))
        + (r - n1) * np.log(l2b)
        - l1 * expo1
        - l2b * expo2
    )


@dataclass(frozen=True)
class ScoreEq8:
    """Analytic gradient of loglik_eq8.

    d_pi has length m - 1: components j = 1..m-1 are free, the last absorbs
    the sum-to-one constraint.
    """

    d_alpha: float
    d_lambda1: float
    d_lambda2: np.ndarray
    d_pi: np.ndarray


def score_eq8(params: MixtureParams, sample: CensoredSample) -> ScoreEq8:
    _check_stage2(params, sample)
    a, l1, tau = params.alpha, params.lambda1, params.tau
    l2b = params.lambda2_bar
    lam2 = np.array(params.lambda2)
    pi = np.array(params.pi)
    t1, t2 = sample.stage1_times, sample.stage2_times
    n, r, n1 = sample.n, sample.r, sample.n1
    tr = sample.censor_time
    _, expo1, expo2 = _eq8_pieces(params, sample)

    d_lambda1 = n1 / l1 - expo1
    common = (r - n1) / l2b - expo2
    d_lambda2 = pi * common
    d_pi = (lam2[:-1] - lam2[-1]) * common

    ltau = np.log(tau)
    dexpo1 = np.sum(_pow(t1, a) * np.log(t1)) + (n - n1) * _pow(tau, a) * ltau
    dexpo2 = (
        np.sum(_pow(t2, a) * np.log(t2))
        + (n - r) * _pow(tr, a) * np.log(tr)
        - (n - n1) * _pow(tau, a) * ltau
    )
    d_alpha = (
        r / a + np.sum(np.log(sample.times)) - l1 * dexpo1 - l2b * dexpo2
    )
    return ScoreEq8(
        d_alpha=float(d_alpha),
        d_lambda1=float(d_lambda1),
        d_lambda2=d_lambda2,
        d_pi=d_pi,
    )
