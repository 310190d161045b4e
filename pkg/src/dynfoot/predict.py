"""Posterior-predictive outcome probabilities and ability summaries.

Forecasts average the model's probability mass function over posterior draws
(no score simulation), so they are deterministic given the draws.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import TeamRegistry
from .errors import PeriodOutOfRange, UnknownTeam
from .likelihoods import (
    Family,
    ScoringRates,
    log_pmf_double_poisson,
    log_pmf_negbin_pair,
    log_pmf_skellam,
    log_pmf_zi_skellam,
)
from .space import ModelSpec, ParameterSpace

_CHUNK = 256
_MAX_GRID = 256
_CELL_BUDGET = 4_000_000  # grid cells per chunk of draws


@dataclass(frozen=True)
class Fixture:
    home_team: str
    away_team: str
    period: int


@dataclass
class ForecastSet:
    fixtures: list[Fixture]
    probs: np.ndarray  # (fixtures, 3): home win, draw, away win
    tail_mass: np.ndarray
    score_grids: list | None = None
    diff_dists: list | None = None

    @property
    def p_home(self):
        return self.probs[:, 0]

    @property
    def p_draw(self):
        return self.probs[:, 1]

    @property
    def p_away(self):
        return self.probs[:, 2]

    def __len__(self):
        return len(self.fixtures)


@dataclass
class AbilitySummary:
    """Posterior summaries shaped (2, n_teams, n_periods); axis 0 is (att, def)."""

    teams: tuple[str, ...]
    mean: np.ndarray
    q025: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    q975: np.ndarray

    def rows(self):
        for k, kind in enumerate(("att", "def")):
            for i, team in enumerate(self.teams):
                for t in range(self.mean.shape[2]):
                    yield (team, t + 1, kind, self.mean[k, i, t], self.q25[k, i, t],
                           self.q75[k, i, t], self.q025[k, i, t], self.q975[k, i, t])


def _theta(draws):
    arr = getattr(draws, "draws", draws)
    arr = np.asarray(arr, dtype=float)
    return arr.reshape(-1, arr.shape[-1])


def _poisson_table(lam, k_max):
    """Poisson pmf of each rate in ``lam`` (shape (d,)) on 0..k_max."""
    k = np.arange(k_max + 1)
    return np.exp(k * np.log(lam)[:, None] - lam[:, None] - gammaln(k + 1))


def _bp_grid(l1, l2, l3, k_max):
    """Bivariate Poisson pmf per draw on the score grid, as the convolution
    sum_k Pois(x - k; l1) Pois(y - k; l2) Pois(k; l3) in probability space."""
    p1, p2, p3 = (_poisson_table(v, k_max) for v in (l1, l2, l3))
    out = np.zeros((len(l1), k_max + 1, k_max + 1))
    for k in range(k_max + 1):
        m = k_max + 1 - k
        out[:, k:, k:] += p3[:, k, None, None] * p1[:, :m, None] * p2[:, None, :m]
    return out


def _draw_grids(family, view, rows, ll1, ll2, k_max):
    """Per-draw pmf for the draws in ``rows``: score grids (d, K+1, K+1) for
    count families, difference grids (d, 2K+1) over -K..K for Skellam ones."""
    l1, l2 = np.exp(ll1[rows]), np.exp(ll2[rows])
    if family.uses_difference:
        z = np.arange(-k_max, k_max + 1)[None, :]
        rates = ScoringRates(l1[:, None], l2[:, None])
        if family is Family.SM:
            return np.exp(log_pmf_skellam(z, rates))
        return np.exp(log_pmf_zi_skellam(z, rates, view.omega[rows][:, None]))
    goals = np.arange(k_max + 1)
    if family in (Family.BP, Family.DIBP):
        pmf = _bp_grid(l1, l2, np.exp(view.eta0[rows]), k_max)
        if family is Family.DIBP:
            omega = view.omega[rows]
            pmf *= (1.0 - omega)[:, None, None]
            pmf[:, goals, goals] += omega[:, None] * _poisson_table(view.xi[rows], k_max)
        return pmf
    x, y = goals[None, :, None], goals[None, None, :]
    rates = ScoringRates(l1[:, None, None], l2[:, None, None])
    if family is Family.DP:
        return np.exp(log_pmf_double_poisson(x, y, rates))
    return np.exp(log_pmf_negbin_pair(x, y, rates, view.gamma[rows][:, None, None]))


def _pad(grid, k_old, k_new, difference):
    w = k_new - k_old
    return np.pad(grid, (w, w)) if difference else np.pad(grid, ((0, w), (0, w)))


def _mean_pmf(family, view, ll1, ll2, k_max, tail_tol):
    """Pmf averaged over draws, on a grid grown until every draw's own mass
    beyond it is below ``tail_tol`` (or the grid reaches ``_MAX_GRID``).

    Only the draws that still leak mass are recomputed on the larger grid, so
    a few extreme draws do not inflate the cost of the rest.
    """
    n = len(ll1)
    pending = np.arange(n)
    total, k_prev, k = None, k_max, k_max
    while True:
        cells = (2 * k + 1) if family.uses_difference else (k + 1) ** 2
        chunk = max(1, min(_CHUNK, _CELL_BUDGET // cells))
        acc = np.zeros(2 * k + 1 if family.uses_difference else (k + 1, k + 1))
        leaking = []
        for lo in range(0, len(pending), chunk):
            rows = pending[lo:lo + chunk]
            pmf = _draw_grids(family, view, rows, ll1, ll2, k)
            done = (1.0 - pmf.reshape(len(rows), -1).sum(axis=1) < tail_tol) | (k >= _MAX_GRID)
            acc += pmf[done].sum(axis=0)
            leaking.append(rows[~done])
        total = acc if total is None else acc + _pad(total, k_prev, k, family.uses_difference)
        pending = np.concatenate(leaking)
        if not len(pending):
            return total / n, k
        k_prev, k = k, min(2 * k, _MAX_GRID)


def forecast(draws, fixtures, spec: ModelSpec, registry: TeamRegistry, k_max: int = 15,
             tail_tol: float = 1e-6, keep_grids: bool = False) -> ForecastSet:
    """Three-way outcome probabilities for each fixture.

    Parameters
    ----------
    draws : PosteriorDraws or array (..., dim)
        Unconstrained posterior draws.
    fixtures : list of Fixture
    spec : ModelSpec
    registry : TeamRegistry
    k_max : int
        Initial score bound.  The grid is doubled (up to 256) for every
        draw whose own mass beyond it exceeds ``tail_tol``.

    Outcome probabilities are taken from the grid and renormalised; the
    leftover mass is reported in ``tail_mass``.
    """
    space = ParameterSpace(spec)
    theta = _theta(draws)
    view = space.constrain(theta)
    probs, tails, grids, diffs = [], [], [], []
    for fx in fixtures:
        for team in (fx.home_team, fx.away_team):
            if team not in registry:
                raise UnknownTeam(f"unknown team {team!r}")
        if not 1 <= fx.period <= spec.n_periods:
            raise PeriodOutOfRange(f"period {fx.period} outside 1..{spec.n_periods}")
        h, a, t = registry.index[fx.home_team], registry.index[fx.away_team], fx.period - 1
        ll1 = view.beta0 + view.home + view.att[:, h, t] + view.def_[:, a, t]
        ll2 = view.beta0 + view.att[:, a, t] + view.def_[:, h, t]
        pmf, k = _mean_pmf(spec.family, view, ll1, ll2, k_max, tail_tol)
        tail = max(0.0, 1.0 - pmf.sum())
        if spec.family.uses_difference:
            p = np.array([pmf[k + 1:].sum(), pmf[k], pmf[:k].sum()])
            diffs.append(pmf)
        else:
            p = np.array([np.tril(pmf, -1).sum(), np.trace(pmf), np.triu(pmf, 1).sum()])
            grids.append(pmf)
        probs.append(p / p.sum())
        tails.append(tail)
    return ForecastSet(
        fixtures=list(fixtures),
        probs=np.array(probs).reshape(-1, 3),
        tail_mass=np.array(tails),
        score_grids=grids if keep_grids and not spec.family.uses_difference else None,
        diff_dists=diffs if keep_grids and spec.family.uses_difference else None,
    )


def summarize_abilities(draws, space: ParameterSpace, teams=None) -> AbilitySummary:
    """Posterior mean and 50%/95% central intervals of every ability."""
    theta = _theta(draws)
    if not len(theta):
        raise ValueError("no draws to summarise")
    view = space.constrain(theta)
    both = np.stack([view.att, view.def_], axis=1)  # (draws, 2, teams, periods)
    q = np.quantile(both, [0.025, 0.25, 0.75, 0.975], axis=0)
    teams = tuple(teams) if teams is not None else tuple(str(i + 1) for i in range(space.spec.n_teams))
    return AbilitySummary(teams, both.mean(axis=0), q[0], q[1], q[2], q[3])
