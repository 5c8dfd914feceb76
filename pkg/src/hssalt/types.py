"""Core value types: model parameters and Type-II censored samples."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CdfFamily", "MixtureParams", "CensoredSample"]

_PI_SUM_TOL = 1e-12


class CdfFamily(enum.Enum):
    """Which stage-2 marginal the model evaluates.

    HAZARD_MIXTURE: mixture-weighted hazard (aggregate rate after the stress
    change), the compound CDF of the piecewise-hazard formulation.
    POPULATION_MIXTURE: mixture of per-subgroup survival functions, the
    marginal implied by generating each unit from its latent subgroup.
    The two coincide for t <= tau and whenever there is a single subgroup.
    """

    HAZARD_MIXTURE = "hazard_mixture"
    POPULATION_MIXTURE = "population_mixture"


@dataclass(frozen=True)
class MixtureParams:
    """Parameters of the heterogeneous step-stress Weibull model.

    alpha:   common Weibull shape (> 0).
    lambda1: stage-1 scale rate (> 0).
    lambda2: stage-2 subgroup rates, one per latent subgroup (> 0).
    pi:      mixing proportions, summing to one.
    tau:     stress-change time (> 0).

    Components are stored in canonical order: lambda2 ascending, ties broken
    by descending pi. This fixes mixture label switching everywhere downstream.
    """

    alpha: float
    lambda1: float
    lambda2: tuple
    pi: tuple
    tau: float

    def __post_init__(self):
        alpha = float(self.alpha)
        lambda1 = float(self.lambda1)
        tau = float(self.tau)
        lambda2 = tuple(float(v) for v in np.atleast_1d(self.lambda2))
        pi = tuple(float(v) for v in np.atleast_1d(self.pi))
        if not (alpha > 0 and np.isfinite(alpha)):
            raise ValueError(f"alpha must be positive and finite, got {alpha}")
        if not (lambda1 > 0 and np.isfinite(lambda1)):
            raise ValueError(f"lambda1 must be positive and finite, got {lambda1}")
        if not (tau > 0 and np.isfinite(tau)):
            raise ValueError(f"tau must be positive and finite, got {tau}")
        if len(lambda2) != len(pi):
            raise ValueError("lambda2 and pi must have equal length")
        if len(lambda2) == 0:
            raise ValueError("need at least one mixture component")
        if any(not (v > 0 and np.isfinite(v)) for v in lambda2):
            raise ValueError(f"all lambda2 must be positive, got {lambda2}")
        if any(not (0.0 < p < 1.0 or (p == 1.0 and len(pi) == 1)) for p in pi):
            raise ValueError(f"all pi must lie in (0, 1], got {pi}")
        if abs(sum(pi) - 1.0) > _PI_SUM_TOL:
            raise ValueError(f"pi must sum to 1 within {_PI_SUM_TOL}, got sum {sum(pi)}")
        # canonical order: lambda2 ascending, ties by descending pi
        order = sorted(range(len(lambda2)), key=lambda j: (lambda2[j], -pi[j]))
        lambda2 = tuple(lambda2[j] for j in order)
        pi = tuple(pi[j] for j in order)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lambda1", lambda1)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "lambda2", lambda2)
        object.__setattr__(self, "pi", pi)

    @property
    def m(self) -> int:
        """Number of stage-2 subgroups."""
        return len(self.lambda2)

    @property
    def lambda2_bar(self) -> float:
        """Mixture-weighted stage-2 rate, the only stage-2 functional the
        aggregate-hazard likelihood identifies."""
        return float(np.dot(self.pi, self.lambda2))

    def as_array(self) -> np.ndarray:
        """Flat vector (alpha, lambda1, lambda2..., pi...) in canonical order."""
        return np.concatenate(
            [[self.alpha, self.lambda1], self.lambda2, self.pi]
        )

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "lambda1": self.lambda1,
            "lambda2": list(self.lambda2),
            "pi": list(self.pi),
            "tau": self.tau,
            "m": self.m,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixtureParams":
        return cls(
            alpha=d["alpha"],
            lambda1=d["lambda1"],
            lambda2=tuple(d["lambda2"]),
            pi=tuple(d["pi"]),
            tau=d["tau"],
        )


class DegenerateDataError(ValueError):
    """Sample cannot support the requested fit (e.g. no stage-2 failures)."""


@dataclass(frozen=True)
class CensoredSample:
    """A Type-II censored step-stress dataset.

    times: the r observed order statistics, non-decreasing.
    n:     units placed on test.
    tau:   stress-change time.
    n1:    derived count of failures at or before tau.

    The n - r unobserved lifetimes are right-censored at times[-1].
    """

    times: np.ndarray
    n: int
    tau: float
    n1: int = field(init=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a non-empty 1-D array")
        if np.any(times <= 0) or not np.all(np.isfinite(times)):
            raise ValueError("all failure times must be positive and finite")
        if np.any(np.diff(times) < 0):
            raise ValueError("times must be non-decreasing")
        n = int(self.n)
        tau = float(self.tau)
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        if times.size > n:
            raise ValueError(f"observed {times.size} failures but n = {n}")
        times = times.copy()
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "n1", int(np.sum(times <= tau)))

    @property
    def r(self) -> int:
        """Number of observed failures."""
        return int(self.times.size)

    @property
    def stage1_times(self) -> np.ndarray:
        return self.times[: self.n1]

    @property
    def stage2_times(self) -> np.ndarray:
        return self.times[self.n1 :]

    @property
    def censor_time(self) -> float:
        """Shared pseudo-lifetime of the n - r censored units."""
        return float(self.times[-1])

    def to_dict(self) -> dict:
        return {
            "times": [float(t) for t in self.times],
            "n": self.n,
            "r": self.r,
            "tau": self.tau,
            "n1": self.n1,
        }
