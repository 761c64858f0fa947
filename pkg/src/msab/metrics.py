"""Cardinality error, OSPA and OSPA(2) for labeled estimate logs."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Dict, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class OspaConfig:
    cutoff: float = 200.0
    order: float = 1.0
    window: int = 5
    window_power: float = 0.0

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.window_power < 0:
            raise ValueError("window_power must be non-negative")


def cardinality_error(n_estimated: int, n_true: int) -> int:
    """Signed error; positive means overestimate."""
    return int(n_estimated) - int(n_true)


def _ospa_from_costs(D: np.ndarray, cfg: OspaConfig) -> float:
    """OSPA given an (n, m) matrix of already cut-off base distances."""
    n, m = D.shape
    big = max(n, m)
    if big == 0:
        return 0.0
    c, p = cfg.cutoff, cfg.order
    total = c ** p * abs(n - m)
    if n and m:
        C = np.minimum(D, c) ** p
        rows, cols = linear_sum_assignment(C)
        total += C[rows, cols].sum()
    return float((total / big) ** (1.0 / p))


def ospa(X: np.ndarray, Y: np.ndarray, cfg: OspaConfig = OspaConfig()) -> float:
    """OSPA distance between two point sets (rows are points)."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1) if len(X) else np.zeros((0, 1))
    Y = np.asarray(Y, dtype=float).reshape(len(Y), -1) if len(Y) else np.zeros((0, 1))
    if len(X) and len(Y):
        D = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
    else:
        D = np.zeros((len(X), len(Y)))
    return _ospa_from_costs(D, cfg)


Tracks = Mapping[object, Mapping[int, np.ndarray]]


def _track_distance(a: Mapping[int, np.ndarray], b: Mapping[int, np.ndarray],
                    steps: Sequence[int], weights: Sequence[float], cfg: OspaConfig) -> float:
    """Time-averaged cut-off distance over the steps where either track exists."""
    c, p = cfg.cutoff, cfg.order
    num = den = 0.0
    for t, w in zip(steps, weights):
        xa, xb = a.get(t), b.get(t)
        if xa is None and xb is None:
            continue
        if xa is None or xb is None:
            d = c
        else:
            d = min(c, float(np.linalg.norm(np.asarray(xa) - np.asarray(xb))))
        num += w * d ** p
        den += w
    return (num / den) ** (1.0 / p) if den > 0 else 0.0


def ospa2(estimates: Tracks, truth: Tracks, n_steps: int, cfg: OspaConfig = OspaConfig()) -> np.ndarray:
    """Per-step OSPA(2) over a trailing window of ``cfg.window`` steps.

    ``estimates`` and ``truth`` map a track label to ``{step: position}``.
    Only tracks present somewhere in the window take part.
    """
    out = np.zeros(n_steps)
    for k in range(n_steps):
        steps = list(range(max(0, k - cfg.window + 1), k + 1))
        weights = [(i + 1) ** cfg.window_power for i in range(len(steps))]
        ests = [tr for tr in estimates.values() if any(t in tr for t in steps)]
        trues = [tr for tr in truth.values() if any(t in tr for t in steps)]
        D = np.array([[_track_distance(e, g, steps, weights, cfg) for g in trues] for e in ests])
        out[k] = _ospa_from_costs(D.reshape(len(ests), len(trues)), cfg)
    return out


def estimate_tracks(history) -> Dict[object, Dict[int, np.ndarray]]:
    """label -> {step: position} from a sequence of per-step estimate lists."""
    out: Dict[object, Dict[int, np.ndarray]] = {}
    for k, rec in enumerate(history):
        for e in rec.estimates:
            out.setdefault(e.label, {})[k] = np.asarray(e.state)[[0, 2]]
    return out


def write_metrics_csv(path, rows: Sequence[Mapping], fields: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields))
        w.writeheader()
        for row in rows:
            w.writerow({f: _fmt(row[f]) for f in fields})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6f}"
    return v
