"""Scikit-learn style estimator facade over the EM core.

Experiment design (n, tau) and fitting options live in the constructor;
``fit`` consumes the ordered failure times. Fitted state lands in
trailing-underscore attributes, and ``get_params``/``set_params``/``clone``
behave as scikit-learn expects.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .em import EmConfig, fit_em, fit_homogeneous
from .inference import BootstrapConfig, bootstrap_ci
from .types import CdfFamily, CensoredSample

__all__ = ["StepStressMixtureEstimator", "HomogeneousStepStressEstimator"]


def _as_times(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError(
            f"expected a 1-D array of failure times, got shape {X.shape}"
        )
    return np.sort(X)


class _StepStressBase(BaseEstimator):
    def _make_sample(self, X) -> CensoredSample:
        times = _as_times(X)
        n = self.n if self.n is not None else times.size
        return CensoredSample(times=times, n=n, tau=self.tau)

    def predict_quantile(self, q, family: CdfFamily = CdfFamily.HAZARD_MIXTURE):
        """Plug-in quantile of the fitted lifetime distribution."""
        from . import model

        check_is_fitted(self, "params_")
        q = np.atleast_1d(np.asarray(q, dtype=float))
        out = np.array([model.quantile(self.params_, qi, family) for qi in q])
        return out if out.size > 1 else float(out[0])

    def predict_cdf(self, t, family: CdfFamily = CdfFamily.HAZARD_MIXTURE):
        from . import model

        check_is_fitted(self, "params_")
        return model.cdf(self.params_, t, family)

    def score(self, X, y=None) -> float:
        """Mixture log-likelihood of X under the fitted parameters."""
        from . import model

        check_is_fitted(self, "params_")
        return model.loglik_mixture(self.params_, self._make_sample(X))


class StepStressMixtureEstimator(_StepStressBase):
    """EM fit of the heterogeneous step-stress Weibull model.

    Parameters mirror EmConfig; tau is the stress-change time and n the
    number of units on test (defaults to len(X), i.e. a complete sample).
    """

    def __init__(
        self,
        tau: float = 1.0,
        m: int = 2,
        n: Optional[int] = None,
        max_iterations: int = 2000,
        param_tol: float = 1e-6,
        loglik_tol: float = 1e-8,
        n_starts: int = 10,
        alpha_fixed: Optional[float] = None,
        seed: int = 0,
    ):
        self.tau = tau
        self.m = m
        self.n = n
        self.max_iterations = max_iterations
        self.param_tol = param_tol
        self.loglik_tol = loglik_tol
        self.n_starts = n_starts
        self.alpha_fixed = alpha_fixed
        self.seed = seed

    def fit(self, X, y=None):
        sample = self._make_sample(X)
        cfg = EmConfig(
            m=self.m,
            max_iterations=self.max_iterations,
            param_tol=self.param_tol,
            loglik_tol=self.loglik_tol,
            n_starts=self.n_starts,
            alpha_fixed=self.alpha_fixed,
            seed=self.seed,
        )
        fit = fit_em(sample, cfg)
        self.sample_ = sample
        self.fit_result_ = fit
        self.params_ = fit.params
        self.loglik_ = fit.loglik
        self.n_iter_ = fit.iterations
        self.converged_ = fit.converged
        self.responsibilities_ = fit.responsibilities
        return self

    def bootstrap_ci_(self, B: int = 1000, level: float = 0.95, seed: int = 0):
        check_is_fitted(self, "params_")
        cfg = BootstrapConfig(
            B=B, level=level, seed=seed,
            refit=EmConfig(m=self.m, n_starts=4, alpha_fixed=self.alpha_fixed),
        )
        return bootstrap_ci(self.sample_, self.fit_result_, cfg)


class HomogeneousStepStressEstimator(_StepStressBase):
    """Closed-form single-population baseline (no stage-2 mixture)."""

    def __init__(
        self,
        tau: float = 1.0,
        n: Optional[int] = None,
        alpha_fixed: Optional[float] = None,
    ):
        self.tau = tau
        self.n = n
        self.alpha_fixed = alpha_fixed

    def fit(self, X, y=None):
        sample = self._make_sample(X)
        fit = fit_homogeneous(sample, alpha_fixed=self.alpha_fixed)
        self.sample_ = sample
        self.fit_result_ = fit
        self.params_ = fit.params
        self.loglik_ = fit.loglik
        self.converged_ = fit.converged
        return self
