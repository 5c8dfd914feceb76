"""Type-II censored dataset generation with reproducible per-replication streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .types import CensoredSample, MixtureParams

__all__ = ["SimRequest", "LabeledSample", "stream_for", "generate_sample",
           "generate_nondegenerate"]


@dataclass(frozen=True)
class SimRequest:
    """One simulation draw: parameters, design (n, r), and stream identity."""

    params: MixtureParams
    n: int
    r: int
    seed: int
    replication_index: int = 0
    emit_labels: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be at least 2, got {self.n}")
        if not 1 <= self.r <= self.n:
            raise ValueError(f"r must lie in [1, n], got r={self.r}, n={self.n}")
        if self.replication_index < 0:
            raise ValueError("replication_index must be non-negative")


@dataclass(frozen=True)
class LabeledSample:
    """Generated sample, optionally with the latent subgroup label of each
    observed stage-2 failure. discarded marks draws with no stage-2 failures
    (n1 >= r) or no stage-2 survivors (n1 = n); the caller owns redraw policy."""

    sample: Optional[CensoredSample]
    labels: Optional[np.ndarray]
    discarded: bool
    n1: int


def stream_for(seed: int, replication_index: int) -> np.random.Generator:
    """Independent, order-agnostic random stream for one replication.

    Derived by spawn-key from (seed, index): distinct indices give
    statistically independent streams regardless of execution schedule.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replication_index),))
    return np.random.default_rng(ss)


def generate_sample(req: SimRequest, rng: Optional[np.random.Generator] = None) -> LabeledSample:
    """Draw one heterogeneous step-stress dataset under Type-II censoring.

    Stage 1: sorted uniforms below G(tau) inverted through the stage-1 CDF.
    Stage 2: multinomial subgroup counts, then per-subgroup inversion of the
    left-truncated Weibull CDF t = (tau^a - ln(1-U)/lambda2j)^(1/a).
    """
    p = req.params
    if rng is None:
        rng = stream_for(req.seed, req.replication_index)
    a, l1, tau = p.alpha, p.lambda1, p.tau
    taua = tau**a
    g_tau = 1.0 - np.exp(-l1 * taua)

    u = np.sort(rng.uniform(size=req.n))
    n1 = int(np.searchsorted(u, g_tau, side="right"))
    if n1 >= req.r or n1 == req.n:
        return LabeledSample(sample=None, labels=None, discarded=True, n1=n1)

    t1 = (-np.log1p(-u[:n1]) / l1) ** (1.0 / a)

    counts = rng.multinomial(req.n - n1, p.pi)
    times2 = []
    labels2 = []
    for j, cnt in enumerate(counts):
        if cnt == 0:
            continue
        uj = np.sort(rng.uniform(size=cnt))
        tj = (taua - np.log1p(-uj) / p.lambda2[j]) ** (1.0 / a)
        times2.append(tj)
        labels2.append(np.full(cnt, j, dtype=int))
    times2 = np.concatenate(times2)
    labels2 = np.concatenate(labels2)
    order = np.argsort(times2, kind="stable")
    keep = order[: req.r - n1]
    times2_kept = times2[keep]
    # concatenation is already sorted: stage-1 times are <= tau < stage-2 times
    sample = CensoredSample(
        times=np.concatenate([t1, times2_kept]), n=req.n, tau=tau
    )
    labels = labels2[keep] if req.emit_labels else None
    return LabeledSample(sample=sample, labels=labels, discarded=False, n1=n1)


def generate_nondegenerate(
    req: SimRequest, max_redraws: int = 1000
) -> tuple[LabeledSample, int]:
    """Redraw through successive sub-streams until a non-degenerate sample
    appears; returns (sample, number of discarded draws)."""
    rng = stream_for(req.seed, req.replication_index)
    for attempt in range(max_redraws):
        out = generate_sample(req, rng=rng)
        if not out.discarded:
            return out, attempt
    raise RuntimeError(
        f"no non-degenerate sample in {max_redraws} draws; "
        "the design (n, r, tau) is incompatible with the parameters"
    )
