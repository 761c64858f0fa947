"""Gibbs sampler over multi-sensor measurement tuples.

The chain starts from the all-missed tuple and, on each iteration, resamples
every sensor's coordinate (in a freshly shuffled order) from its conditional
distribution given the other coordinates.  The tuple reached at the end of
each iteration is recorded.  No burn-in is discarded: every distinct visited
tuple is a birth candidate.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from msab.association import AssociationTable
from msab.core import non_missed_count

log = logging.getLogger(__name__)


class ConditionalBackend(Protocol):
    sizes: tuple

    def conditional_weights(self, s: int, J: Sequence[int], table: AssociationTable,
                            active: Optional[np.ndarray] = None) -> np.ndarray: ...

    def log_psi_bar(self, J: Sequence[int]) -> float: ...


@dataclass(frozen=True)
class GibbsConfig:
    iterations: int = 1000
    restart_period: Optional[int] = None
    rng_seed: int = 0
    tau: float = 1.0
    min_detections: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.restart_period is not None and self.restart_period < 1:
            raise ValueError("restart_period must be positive")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")


@dataclass
class GibbsResult:
    tuples: set
    counts: Counter = field(default_factory=Counter)
    n_fallback: int = 0

    def frequencies(self) -> dict:
        total = sum(self.counts.values())
        return {J: c / total for J, c in self.counts.items()}


def chain_step(J: tuple, s: int, weights: np.ndarray, rng: np.random.Generator) -> tuple:
    """Replace coordinate ``s`` of ``J`` with a categorical draw from ``weights``."""
    cdf = np.cumsum(weights)
    total = cdf[-1]
    if not total > 0:
        raise ValueError("conditional weights are all zero")
    j = int(np.searchsorted(cdf, rng.random() * total, side="right"))
    j = min(j, len(weights) - 1)
    while weights[j] == 0:  # guard against landing on a zero-width bin at the edge
        j -= 1
    return J[:s] + (j,) + J[s + 1:]


def active_masks(table: AssociationTable, tau: float) -> list:
    """Candidate masks: measurements with r_A above ``tau`` are excluded; index 0 never is."""
    masks = []
    for row in table.per_sensor:
        mask = row <= tau
        mask[0] = True
        masks.append(mask)
    return masks


def sample_birth_tuples(backend: ConditionalBackend, table: AssociationTable,
                        cfg: GibbsConfig, rng: Optional[np.random.Generator] = None) -> GibbsResult:
    sizes = tuple(backend.sizes)
    if table.sizes != sizes:
        raise ValueError(f"association table sizes {table.sizes} do not match measurements {sizes}")
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    V = len(sizes)
    masks = active_masks(table, cfg.tau)
    all_missed = (0,) * V
    J = all_missed
    counts: Counter = Counter()
    n_fallback = 0
    order = np.arange(V)
    for t in range(cfg.iterations):
        if cfg.restart_period and t > 0 and t % cfg.restart_period == 0:
            J = all_missed
        rng.shuffle(order)
        for s in order:
            mask = masks[s]
            if not mask[1:].any():
                J = J[:s] + (0,) + J[s + 1:]
                continue
            w = backend.conditional_weights(int(s), J, table, mask)
            if not np.any(w > 0):
                n_fallback += 1
                J = J[:s] + (0,) + J[s + 1:]
                continue
            J = chain_step(J, int(s), w, rng)
        counts[J] += 1
    if n_fallback:
        log.debug("gibbs: %d forced missed detections", n_fallback)
    tuples = {J for J in counts if non_missed_count(J) >= cfg.min_detections}
    return GibbsResult(tuples=tuples, counts=counts, n_fallback=n_fallback)
