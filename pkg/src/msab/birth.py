"""Assemble the truncated birth LMB density from sampled measurement tuples."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.special import logsumexp

from msab.association import AssociationTable, log_unassociation_prob
from msab.core import BernoulliComponent, LmbDensity, non_missed_count, tuple_to_label

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BirthConfig:
    r_b_max: float = 1.0
    lambda_b: float = 0.5
    min_detections: int = 2

    def __post_init__(self):
        if not 0.0 <= self.r_b_max <= 1.0:
            raise ValueError("r_b_max must lie in [0, 1]")
        if self.lambda_b < 0:
            raise ValueError("lambda_b must be non-negative")
        if self.min_detections < 0:
            raise ValueError("min_detections must be non-negative")


def effective_birth_probs(tuples: Iterable[tuple], table: AssociationTable, backend) -> dict:
    """r_U(J) * evidence(J), normalized over the given tuples.

    The normalizer runs over the supplied (sampled) set rather than the full
    tuple space; the mass of unsampled tuples is the truncation error.
    """
    tuples = sorted(set(tuples))
    if not tuples:
        return {}
    logw = np.array([log_unassociation_prob(J, table) + backend.log_psi_bar(J) for J in tuples])
    if not np.any(np.isfinite(logw)):
        log.warning("effective_birth_probs: every sampled tuple has zero weight")
        return {}
    p = np.exp(logw - logsumexp(logw))
    return dict(zip(tuples, p.tolist()))


def build_birth_lmb(tuples: Iterable[tuple], table: AssociationTable, backend, cfg: BirthConfig,
                    k: int, spatial_builder: Optional[Callable] = None) -> LmbDensity:
    """Birth LMB with existence ``min(r_b_max, r_hat * lambda_b)`` per surviving tuple.

    Tuples with fewer than ``cfg.min_detections`` detections are dropped before
    normalization, so r_hat sums to one over the survivors.
    """
    survivors = [J for J in set(tuples) if non_missed_count(J) >= cfg.min_detections]
    r_hat = effective_birth_probs(survivors, table, backend)
    build = spatial_builder or backend.birth_spatial
    comps = []
    for J, r in r_hat.items():
        existence = min(cfg.r_b_max, r * cfg.lambda_b)
        comps.append(BernoulliComponent(tuple_to_label(J, k), float(existence), build(J)))
    return LmbDensity(tuple(comps))
