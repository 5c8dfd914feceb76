"""EM estimation for the heterogeneous step-stress Weibull model.

Multi-start EM with closed-form updates for the mixing weights and scale
rates and a safeguarded 1-D root solve for the shared shape parameter, plus
the closed-form homogeneous (single-component) baseline fit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import model
from .types import CensoredSample, DegenerateDataError, MixtureParams

__all__ = [
    "EmConfig",
    "EmFit",
    "FitFailureError",
    "AlphaSolveError",
    "ComponentCollapseError",
    "e_step",
    "m_step",
    "solve_alpha_score",
    "fit_em",
    "fit_homogeneous",
]

_ASCENT_SLACK = 1e-8
_COLLAPSE_MASS = 1e-8
_ALPHA_SCORE_TOL = 1e-10


class FitFailureError(RuntimeError):
    """Every EM start failed; per-start diagnostics attached."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__(
            "all EM starts failed: " + "; ".join(str(d) for d in self.diagnostics)
        )


class AlphaSolveError(RuntimeError):
    """No sign change found for the shape-parameter score equation."""


class ComponentCollapseError(RuntimeError):
    """A mixture component lost all observed-failure mass."""


@dataclass(frozen=True)
class EmConfig:
    """EM settings. alpha_fixed pins the shape parameter (the exponential
    special case at alpha_fixed = 1)."""

    m: int = 2
    max_iterations: int = 2000
    param_tol: float = 1e-6
    loglik_tol: float = 1e-8
    n_starts: int = 10
    alpha_fixed: Optional[float] = None
    alpha_bracket: tuple = (1e-3, 50.0)
    seed: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be at least 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.param_tol <= 0 or self.loglik_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.alpha_bracket[0] < self.alpha_bracket[1]:
            raise ValueError("alpha_bracket must be (lo, hi) with lo < hi")
        if self.alpha_fixed is not None and self.alpha_fixed <= 0:
            raise ValueError("alpha_fixed must be positive")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "max_iterations": self.max_iterations,
            "param_tol": self.param_tol,
            "loglik_tol": self.loglik_tol,
            "n_starts": self.n_starts,
            "alpha_fixed": self.alpha_fixed,
            "alpha_bracket": list(self.alpha_bracket),
            "seed": self.seed,
        }


@dataclass(frozen=True)
class EmFit:
    """Converged estimates with trace and convergence metadata.

    responsibilities has one row per observed stage-2 failure plus a final
    shared row for the n - r censored units (weight n - r in all updates).
    """

    params: MixtureParams
    loglik: float
    loglik_eq8: float
    responsibilities: np.ndarray
    iterations: int
    converged: bool
    starts_tried: int
    loglik_trace: np.ndarray

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "loglik": self.loglik,
            "loglik_eq8": self.loglik_eq8,
            "iterations": self.iterations,
            "converged": self.converged,
            "starts_tried": self.starts_tried,
        }


class _Arrays:
    """Per-sample constants reused across EM iterations."""

    def __init__(self, sample: CensoredSample):
        self.sample = sample
        self.n = sample.n
        self.r = sample.r
        self.n1 = sample.n1
        self.n_cens = sample.n - sample.r
        self.tau = sample.tau
        self.ltau = np.log(sample.tau)
        self.t1 = sample.stage1_times
        self.lt1 = np.log(self.t1)
        self.t2 = sample.stage2_times
        self.lt2 = np.log(self.t2)
        self.tr = sample.censor_time
        self.ltr = np.log(self.tr)
        self.sum_lt1 = float(np.sum(self.lt1))
        self.sum_lt2 = float(np.sum(self.lt2))


def _log_weights(arr: _Arrays, alpha, lam2, pi):
    """Unnormalized log responsibilities: observed rows use the truncated
    density, the censored row the truncated survival at the stop time."""
    taua = arr.tau**alpha
    excess2 = np.exp(alpha * arr.lt2) - taua
    logpi = np.log(pi)
    log_obs = (
        logpi[None, :]
        + np.log(alpha)
        + np.log(lam2)[None, :]
        + (alpha - 1.0) * arr.lt2[:, None]
        - np.outer(excess2, lam2)
    )
    excess_r = arr.tr**alpha - taua
    log_cens = logpi - lam2 * excess_r
    return log_obs, log_cens


def _normalize_rows(logw: np.ndarray) -> np.ndarray:
    mx = logw.max(axis=-1, keepdims=True)
    w = np.exp(logw - mx)
    return w / w.sum(axis=-1, keepdims=True)


def e_step(params: MixtureParams, sample: CensoredSample) -> np.ndarray:
    """Posterior subgroup probabilities; final row is the shared censored row."""
    if params.m > 1 and sample.n1 >= sample.r:
        raise DegenerateDataError("no stage-2 failures; E-step undefined for m > 1")
    arr = _Arrays(sample)
    log_obs, log_cens = _log_weights(
        arr, params.alpha, np.array(params.lambda2), np.array(params.pi)
    )
    return np.vstack([_normalize_rows(log_obs), _normalize_rows(log_cens)])


def _alpha_score_fn(arr: _Arrays, l1, lam2, eta_obs, eta_cens):
    """Score in alpha of the expected complete-data log-likelihood with the
    current rates held fixed."""
    w_obs = eta_obs @ lam2
    w_cens = float(eta_cens @ lam2) * arr.n_cens
    n1, r = arr.n1, arr.r
    n_past_tau = arr.n - n1

    def score(alpha):
        t1a = np.exp(alpha * arr.lt1)
        t2a = np.exp(alpha * arr.lt2)
        taua = arr.tau**alpha
        tra = arr.tr**alpha
        s = r / alpha + arr.sum_lt1 + arr.sum_lt2
        s -= l1 * (np.dot(t1a, arr.lt1) + n_past_tau * taua * arr.ltau)
        s -= np.dot(w_obs, t2a * arr.lt2) - np.sum(w_obs) * taua * arr.ltau
        s -= w_cens * (tra * arr.ltr - taua * arr.ltau)
        return s

    return score


def _solve_bracketed(score, bracket, max_expand=40, xtol=1e-12):
    lo, hi = bracket
    flo, fhi = score(lo), score(hi)
    for _ in range(max_expand):
        if not (np.isfinite(flo) and np.isfinite(fhi)):
            raise AlphaSolveError("non-finite shape score at bracket endpoints")
        if np.sign(flo) != np.sign(fhi):
            break
        if flo < 0:  # score decreasing in alpha: root below lo
            lo /= 2.0
            flo = score(lo)
        else:
            hi *= 2.0
            fhi = score(hi)
    else:
        raise AlphaSolveError(
            f"no sign change for shape score on [{lo:g}, {hi:g}]"
        )
    return float(brentq(score, lo, hi, xtol=xtol))


def solve_alpha_score(
    params_k: MixtureParams,
    responsibilities: np.ndarray,
    sample: CensoredSample,
    bracket=(1e-3, 50.0),
) -> float:
    """Root of the shape-parameter score equation given responsibilities,
    with the current scale rates held fixed."""
    arr = _Arrays(sample)
    score = _alpha_score_fn(
        arr,
        params_k.lambda1,
        np.array(params_k.lambda2),
        responsibilities[:-1],
        responsibilities[-1],
    )
    return _solve_bracketed(score, bracket)


def _canonicalize(lam2, pi, eta=None):
    order = np.lexsort((-pi, lam2))
    if eta is None:
        return lam2[order], pi[order]
    return lam2[order], pi[order], eta[:, order]


def _m_step_arrays(arr: _Arrays, alpha_k, l1_k, lam2_k, eta, cfg: EmConfig):
    """One M-step on raw arrays; update order:
    pi, then alpha, then lambda1 and lambda2 with the new alpha."""
    eta_obs, eta_cens = eta[:-1], eta[-1]
    mass_obs = eta_obs.sum(axis=0)
    if np.any(mass_obs < _COLLAPSE_MASS):
        raise ComponentCollapseError(
            f"observed-failure mass per component {mass_obs}"
        )
    n_cens = arr.n_cens
    denom_units = arr.n - arr.n1
    pi_new = (mass_obs + n_cens * eta_cens) / denom_units
    if cfg.alpha_fixed is not None:
        alpha_new = float(cfg.alpha_fixed)
    else:
        score = _alpha_score_fn(arr, l1_k, lam2_k, eta_obs, eta_cens)
        # warm bracket around the current iterate; expansion handles the rest
        alpha_new = _solve_bracketed(
            score, (0.8 * alpha_k, 1.25 * alpha_k), xtol=1e-10
        )
    taua = arr.tau**alpha_new
    t1a = np.exp(alpha_new * arr.lt1)
    l1_new = arr.n1 / (np.sum(t1a) + (arr.n - arr.n1) * taua)
    excess2 = np.exp(alpha_new * arr.lt2) - taua
    excess_r = arr.tr**alpha_new - taua
    denom = eta_obs.T @ excess2 + n_cens * eta_cens * excess_r
    if np.any(denom <= 0):
        raise RuntimeError(f"non-positive scale-rate denominator {denom}")
    lam2_new = mass_obs / denom
    return alpha_new, float(l1_new), lam2_new, pi_new


def m_step(
    params_k: MixtureParams,
    responsibilities: np.ndarray,
    sample: CensoredSample,
    cfg: EmConfig,
) -> MixtureParams:
    """Parameter update given responsibilities; output is canonically ordered."""
    arr = _Arrays(sample)
    alpha, l1, lam2, pi = _m_step_arrays(
        arr,
        params_k.alpha,
        params_k.lambda1,
        np.array(params_k.lambda2),
        responsibilities,
        cfg,
    )
    lam2, pi = _canonicalize(lam2, pi)
    return MixtureParams(alpha=alpha, lambda1=l1, lambda2=tuple(lam2),
                         pi=tuple(pi), tau=sample.tau)


def _fast_loglik_mixture(arr: _Arrays, alpha, l1, lam2, pi):
    log_obs, log_cens = _log_weights(arr, alpha, lam2, pi)
    taua = arr.tau**alpha
    t1a = np.exp(alpha * arr.lt1)
    out = (
        arr.n1 * (np.log(alpha) + np.log(l1))
        + (alpha - 1.0) * arr.sum_lt1
        - l1 * np.sum(t1a)
        - (arr.n - arr.n1) * l1 * taua
    )
    mx = log_obs.max(axis=1)
    out += np.sum(mx + np.log(np.sum(np.exp(log_obs - mx[:, None]), axis=1)))
    if arr.n_cens:
        mc = log_cens.max()
        out += arr.n_cens * (mc + np.log(np.sum(np.exp(log_cens - mc))))
    return float(out)


def _initial_starts(sample: CensoredSample, cfg: EmConfig):
    """Start 0: homogeneous profile fit with the single rate fanned out
    geometrically across components. Later starts: log-normal jitter and a
    flat Dirichlet draw for the weights."""
    base = fit_homogeneous(sample, alpha_fixed=cfg.alpha_fixed)
    a0 = base.params.alpha
    l10 = base.params.lambda1
    l20 = base.params.lambda2[0]
    m = cfg.m
    if m == 1:
        spread = np.array([1.0])
    else:
        spread = 4.0 ** np.linspace(-1.0, 1.0, m)
    starts = [(a0, l10, l20 * spread, np.full(m, 1.0 / m))]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(cfg.seed)))
    for _ in range(cfg.n_starts - 1):
        jitter = rng.normal(0.0, 0.5, size=2 + m)
        a = a0 if cfg.alpha_fixed is not None else a0 * np.exp(jitter[0])
        starts.append(
            (
                a,
                l10 * np.exp(jitter[1]),
                l20 * spread * np.exp(jitter[2:]),
                rng.dirichlet(np.ones(m)),
            )
        )
    return starts


def _run_start(arr: _Arrays, start, cfg: EmConfig):
    alpha, l1, lam2, pi = start
    lam2 = np.asarray(lam2, dtype=float)
    pi = np.asarray(pi, dtype=float)
    lam2, pi = _canonicalize(lam2, pi)
    trace = []
    ll_prev = -np.inf
    converged = False
    it = 0
    if cfg.max_iterations == 0:
        # evaluate the start without iterating; never converged
        log_obs, log_cens = _log_weights(arr, alpha, lam2, pi)
        eta = np.vstack([_normalize_rows(log_obs), _normalize_rows(log_cens)])
        trace.append(_fast_loglik_mixture(arr, alpha, l1, lam2, pi))
        return (alpha, l1, lam2, pi), eta, np.array(trace), 0, False
    eta = None
    for it in range(1, cfg.max_iterations + 1):
        log_obs, log_cens = _log_weights(arr, alpha, lam2, pi)
        eta = np.vstack(
            [_normalize_rows(log_obs), _normalize_rows(log_cens)]
        )
        alpha_n, l1_n, lam2_n, pi_n = _m_step_arrays(
            arr, alpha, l1, lam2, eta, cfg
        )
        lam2_n, pi_n, eta = _canonicalize(lam2_n, pi_n, eta)
        old = np.concatenate([[alpha, l1], lam2, pi])
        new = np.concatenate([[alpha_n, l1_n], lam2_n, pi_n])
        rel_change = np.max(np.abs(new - old) / np.maximum(np.abs(old), 1e-300))
        alpha, l1, lam2, pi = alpha_n, l1_n, lam2_n, pi_n
        ll = _fast_loglik_mixture(arr, alpha, l1, lam2, pi)
        if ll < ll_prev - _ASCENT_SLACK:
            raise RuntimeError(
                f"monotonicity violation at iteration {it}: "
                f"{ll_prev:.10f} -> {ll:.10f}"
            )
        trace.append(ll)
        if rel_change < cfg.param_tol or abs(ll - ll_prev) < cfg.loglik_tol:
            converged = True
            ll_prev = ll
            break
        ll_prev = ll
    return (alpha, l1, lam2, pi), eta, np.array(trace), it, converged


def fit_em(sample: CensoredSample, cfg: EmConfig) -> EmFit:
    """Multi-start EM; returns the start with the highest mixture
    log-likelihood. Starts that lose a component or cannot solve the shape
    score are abandoned; if every start fails, FitFailureError carries the
    per-start diagnostics."""
    if sample.r < 2:
        raise DegenerateDataError("need at least two observed failures")
    if sample.n1 == 0:
        raise DegenerateDataError("no stage-1 failures; lambda1 is inestimable")
    if cfg.m > 1 and sample.r - sample.n1 < cfg.m:
        raise DegenerateDataError(
            f"need at least m={cfg.m} stage-2 failures, "
            f"got {sample.r - sample.n1}"
        )
    if cfg.m == 1 and sample.r - sample.n1 < 1:
        raise DegenerateDataError("no stage-2 failures; lambda2 is inestimable")
    arr = _Arrays(sample)
    best = None
    diagnostics = []
    for idx, start in enumerate(_initial_starts(sample, cfg)):
        try:
            state, eta, trace, iters, converged = _run_start(arr, start, cfg)
        except (AlphaSolveError, ComponentCollapseError, RuntimeError) as exc:
            diagnostics.append(f"start {idx}: {exc}")
            continue
        ll = trace[-1]
        if best is None or ll > best[0]:
            best = (ll, state, eta, trace, iters, converged)
    if best is None:
        raise FitFailureError(diagnostics)
    ll, (alpha, l1, lam2, pi), eta, trace, iters, converged = best
    params = MixtureParams(
        alpha=alpha, lambda1=l1, lambda2=tuple(lam2), pi=tuple(pi),
        tau=sample.tau,
    )
    return EmFit(
        params=params,
        loglik=float(ll),
        loglik_eq8=model.loglik_eq8(params, sample),
        responsibilities=eta,
        iterations=iters,
        converged=converged,
        starts_tried=cfg.n_starts,
        loglik_trace=trace,
    )


def fit_homogeneous(
    sample: CensoredSample, alpha_fixed: Optional[float] = None
) -> EmFit:
    """Single-component fit with closed-form rates.

    With alpha free, the shape is the root of the profile score; the rates
    then follow in closed form. Matches fit_em at m = 1.
    """
    if sample.r < 2:
        raise DegenerateDataError("need at least two observed failures")
    n1, r, n = sample.n1, sample.r, sample.n
    if n1 < 1:
        raise DegenerateDataError("no stage-1 failures; lambda1 is inestimable")
    if r - n1 < 1:
        raise DegenerateDataError("no stage-2 failures; lambda2 is inestimable")
    arr = _Arrays(sample)

    def rates(alpha):
        taua = arr.tau**alpha
        l1 = n1 / (np.sum(np.exp(alpha * arr.lt1)) + (n - n1) * taua)
        expo2 = (
            np.sum(np.exp(alpha * arr.lt2))
            + arr.n_cens * arr.tr**alpha
            - (n - n1) * taua
        )
        return float(l1), float((r - n1) / expo2)

    if alpha_fixed is not None:
        alpha = float(alpha_fixed)
    else:
        def profile_score(alpha):
            l1, l2 = rates(alpha)
            taua = arr.tau**alpha
            t1a = np.exp(alpha * arr.lt1)
            t2a = np.exp(alpha * arr.lt2)
            s = r / alpha + arr.sum_lt1 + arr.sum_lt2
            s -= l1 * (np.dot(t1a, arr.lt1) + (n - n1) * taua * arr.ltau)
            s -= l2 * (
                np.dot(t2a, arr.lt2)
                + arr.n_cens * arr.tr**alpha * arr.ltr
                - (n - n1) * taua * arr.ltau
            )
            return s

        alpha = _solve_bracketed(profile_score, (1e-3, 50.0))
    l1, l2 = rates(alpha)
    params = MixtureParams(
        alpha=alpha, lambda1=l1, lambda2=(l2,), pi=(1.0,), tau=sample.tau
    )
    eta = np.ones((r - n1 + 1, 1))
    ll = model.loglik_mixture(params, sample)
    return EmFit(
        params=params,
        loglik=ll,
        loglik_eq8=model.loglik_eq8(params, sample),
        responsibilities=eta,
        iterations=1,
        converged=True,
        starts_tried=1,
        loglik_trace=np.array([ll]),
    )
