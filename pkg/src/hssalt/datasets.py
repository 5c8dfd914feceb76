"""Bundled example datasets: a 40-unit two-stress experiment with a
heterogeneous second stage (complete, and its Type-II censored subset at
r = 35). Stress change at tau = 15."""

from __future__ import annotations

import numpy as np

from .types import CensoredSample

__all__ = ["complete_dataset", "censored_dataset", "load_bundled", "BUNDLED_NAMES"]

_TAU = 15.0
_N = 40

_STAGE1 = [
    0.22, 1.16, 1.45, 1.58, 2.92, 3.70, 4.30, 6.20,
    7.23, 8.79, 9.35, 9.68, 9.89, 10.95, 11.55, 12.48,
    13.56,
]

_STAGE2_FAST = [
    15.05, 15.31, 15.32, 15.42, 15.45, 15.73, 15.74, 15.98,
    17.06,
]

_STAGE2_SLOW = [
    15.27, 15.37, 15.61, 16.38, 18.60, 19.42, 21.00, 22.29,
    24.42, 24.82, 25.54, 28.92, 29.94, 40.19,
]

BUNDLED_NAMES = ("complete", "censored")


def complete_dataset() -> CensoredSample:
    """All 40 failure times (r = n = 40)."""
    times = np.sort(np.array(_STAGE1 + _STAGE2_FAST + _STAGE2_SLOW))
    return CensoredSample(times=times, n=_N, tau=_TAU)


def censored_dataset() -> CensoredSample:
    """Type-II censored subset: the first 35 order statistics."""
    times = np.sort(np.array(_STAGE1 + _STAGE2_FAST + _STAGE2_SLOW))[:35]
    return CensoredSample(times=times, n=_N, tau=_TAU)


def load_bundled(name: str) -> CensoredSample:
    if name == "complete":
        return complete_dataset()
    if name == "censored":
        return censored_dataset()
    raise KeyError(f"unknown bundled dataset {name!r}; choose from {BUNDLED_NAMES}")
