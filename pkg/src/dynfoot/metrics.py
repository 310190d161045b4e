"""Scoring rules for three-way (home win, draw, away win) forecasts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyInput

OUTCOMES = ("home", "draw", "away")


@dataclass(frozen=True)
class OutcomeProbs:
    p: tuple[float, float, float]
    observed: int

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        if len(p) != 3 or min(p) < 0 or abs(sum(p) - 1.0) > 1e-9:
            raise ValueError(f"not a probability vector over three outcomes: {p}")
        if self.observed not in (0, 1, 2):
            raise ValueError("observed outcome index must be 0, 1 or 2")
        object.__setattr__(self, "p", p)


@dataclass(frozen=True)
class MetricReport:
    brier: float
    acp: float
    rps: float
    pseudo_r2: float
    n_matches: int

    def to_dict(self):
        return asdict(self)


def _arrays(items):
    items = list(items)
    if not items:
        raise EmptyInput("no forecasts to score")
    p = np.array([it.p for it in items], dtype=float)
    obs = np.array([it.observed for it in items], dtype=np.int64)
    return p, obs


def brier(items) -> float:
    p, obs = _arrays(items)
    delta = np.eye(3)[obs]
    return float(np.mean(np.sum((p - delta) ** 2, axis=1)))


def acp(items) -> float:
    """Average probability given to the observed outcome."""
    p, obs = _arrays(items)
    return float(np.mean(p[np.arange(len(obs)), obs]))


def rps(items) -> float:
    """Ranked probability score with outcomes ordered home < draw < away."""
    p, obs = _arrays(items)
    cum_p = np.cumsum(p, axis=1)[:, :2]
    cum_o = np.cumsum(np.eye(3)[obs], axis=1)[:, :2]
    return float(np.mean(0.5 * np.sum((cum_p - cum_o) ** 2, axis=1)))


def pseudo_r2(items) -> float:
    """Geometric mean of the observed-outcome probabilities.

    Accumulated in log space; any zero probability makes the result 0.
    """
    p, obs = _arrays(items)
    hit = p[np.arange(len(obs)), obs]
    if np.any(hit == 0):
        return 0.0
    return float(math.exp(math.fsum(np.log(hit)) / len(hit)))


def evaluate(items) -> MetricReport:
    items = list(items)
    return MetricReport(brier(items), acp(items), rps(items), pseudo_r2(items), len(items))
