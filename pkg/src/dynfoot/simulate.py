"""Synthetic leagues drawn from the generative score models.

Each period is one full double round-robin; two consecutive periods form a
season, so a written CSV periodises back to the same period labels.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .data import MatchRecord, PeriodizedDataset, TeamRegistry, _sort_key
from .likelihoods import Family
from .space import Dynamics, ModelSpec, ParameterSpace, ParameterView


def double_round_robin(n_teams: int) -> list[list[tuple[int, int]]]:
    """Rounds of (home, away) index pairs; every pair meets once at each ground."""
    if n_teams % 2:
        raise ValueError("round-robin schedule needs an even number of teams")
    order = list(range(n_teams))
    first_leg = []
    for r in range(n_teams - 1):
        pairs = []
        for k in range(n_teams // 2):
            a, b = order[k], order[n_teams - 1 - k]
            pairs.append((a, b) if (r + k) % 2 == 0 else (b, a))
        first_leg.append(pairs)
        order = [order[0], order[-1]] + order[1:-1]
    return first_leg + [[(b, a) for a, b in rnd] for rnd in first_leg]


@dataclass
class Truth:
    spec: ModelSpec
    view: ParameterView

    def to_dict(self):
        space = ParameterSpace(self.spec)
        flat = space.flatten(space.unconstrain(self.view))
        return {
            "family": self.spec.family.value,
            "dynamics": self.spec.dynamics.value,
            "n_teams": self.spec.n_teams,
            "n_periods": self.spec.n_periods,
            "parameters": dict(zip(space.constrained_names, map(float, flat))),
        }


def _centre(x):
    return x - x.mean(axis=0, keepdims=True)


def draw_truth(spec: ModelSpec, rng: np.random.Generator, beta0=0.1, home=0.25,
               ability_sd=0.3, step_sd=None, gamma=0.1, omega=0.1, xi=1.0, eta0=-1.5) -> Truth:
    """Sample ground-truth parameters for a simulated league.

    Period-1 abilities are N(0, ability_sd^2), centred to sum to zero.  Later
    periods add centred N(0, step_sd^2) steps; ``step_sd`` defaults to the
    precision implied by the regime (0.1 for ``owen``/``egidi``, a spike/slab
    draw for ``weighted``) and is ignored for ``static``.
    """
    n, t = spec.n_teams, spec.n_periods
    att = np.zeros((n, t))
    dfn = np.zeros((n, t))
    att[:, 0] = _centre(rng.normal(0, ability_sd, n))
    dfn[:, 0] = _centre(rng.normal(0, ability_sd, n))
    view = ParameterView(beta0=np.float64(beta0), home=np.float64(home), att=att, def_=dfn)
    steps = np.zeros((2, max(t - 1, 0)))
    if spec.dynamics is not Dynamics.STATIC and t > 1:
        if step_sd is not None:
            steps[:] = step_sd
        elif spec.dynamics is Dynamics.WEIGHTED:
            hp = spec.hyper
            slab = rng.random(steps.shape) < hp.p_slab
            phi = np.where(slab, np.abs(rng.normal(hp.mu_slab, hp.sd_slab, steps.shape)),
                           np.abs(rng.normal(hp.mu_spike, hp.sd_spike, steps.shape)))
            steps = 1.0 / np.sqrt(np.maximum(phi, 1e-3))
        else:
            steps[:] = 0.1
    for k in range(1, t):
        if spec.dynamics is Dynamics.STATIC:
            att[:, k], dfn[:, k] = att[:, 0], dfn[:, 0]
        else:
            att[:, k] = att[:, k - 1] + _centre(rng.normal(0, 1, n)) * steps[0, k - 1]
            dfn[:, k] = dfn[:, k - 1] + _centre(rng.normal(0, 1, n)) * steps[1, k - 1]
    with np.errstate(divide="ignore"):
        prec = 1.0 / np.where(steps > 0, steps, np.inf) ** 2
    prec = np.where(np.isfinite(prec) & (prec > 0), prec, 1e6)
    if spec.dynamics is Dynamics.OWEN:
        view.sigma = np.float64(prec.mean()) if prec.size else np.float64(1.0)
    elif spec.dynamics is Dynamics.EGIDI:
        view.sigma_att = np.float64(prec[0].mean()) if prec.size else np.float64(1.0)
        view.sigma_def = np.float64(prec[1].mean()) if prec.size else np.float64(1.0)
    elif spec.dynamics is Dynamics.WEIGHTED:
        view.phi_att, view.phi_def = prec[0], prec[1]
    for name, value in (("eta0", eta0), ("gamma", gamma), ("omega", omega), ("xi", xi)):
        if name in spec.family.extras:
            setattr(view, name, np.float64(value))
    return Truth(spec, view)


def draw_scores(family: Family, lam1, lam2, view: ParameterView, rng: np.random.Generator):
    """Sample (home, away) goals for arrays of scoring rates."""
    family = Family(family)
    lam1, lam2 = np.asarray(lam1, float), np.asarray(lam2, float)
    if family in (Family.DP, Family.SM):
        return rng.poisson(lam1), rng.poisson(lam2)
    if family is Family.NB:
        size = 1.0 / float(view.gamma)
        return (rng.negative_binomial(size, size / (size + lam1)),
                rng.negative_binomial(size, size / (size + lam2)))
    if family is Family.ZISM:
        x, y = rng.poisson(lam1), rng.poisson(lam2)
        tie = rng.random(lam1.shape) < float(view.omega)
        return np.where(tie, np.minimum(x, y), x), np.where(tie, np.minimum(x, y), y)
    lam3 = float(np.exp(view.eta0))
    shared = rng.poisson(lam3, lam1.shape)
    x, y = rng.poisson(lam1) + shared, rng.poisson(lam2) + shared
    if family is Family.DIBP:
        tie = rng.random(lam1.shape) < float(view.omega)
        draw = rng.poisson(float(view.xi), lam1.shape)
        x, y = np.where(tie, draw, x), np.where(tie, draw, y)
    return x, y


def simulate_league(truth: Truth, rng: np.random.Generator, start=date(2001, 8, 1)) -> PeriodizedDataset:
    spec, v = truth.spec, truth.view
    n, t = spec.n_teams, spec.n_periods
    names = tuple(f"Team{i + 1:02d}" for i in range(n))
    schedule = double_round_robin(n)
    matches, periods = [], []
    for p in range(t):
        season, half = divmod(p, 2)
        pairs = [(r, h, a) for r, rnd in enumerate(schedule) for h, a in rnd]
        r_idx = np.array([r for r, _, _ in pairs])
        h = np.array([h for _, h, _ in pairs])
        a = np.array([a for _, _, a in pairs])
        lam1 = np.exp(v.beta0 + v.home + v.att[h, p] + v.def_[a, p])
        lam2 = np.exp(v.beta0 + v.att[a, p] + v.def_[h, p])
        x, y = draw_scores(spec.family, lam1, lam2, v, rng)
        for r, hi, ai, gx, gy in zip(r_idx, h, a, x, y):
            rnd = int(half * len(schedule) + r + 1)
            matches.append(MatchRecord(
                date=start + timedelta(days=365 * season + 2 * rnd), home_team=names[int(hi)], away_team=names[int(ai)],
                home_goals=int(gx), away_goals=int(gy), season=f"S{season + 1:02d}", round=rnd))
            periods.append(p + 1)
    order = sorted(range(len(matches)), key=lambda k: _sort_key(matches[k]))
    return PeriodizedDataset(tuple(matches[k] for k in order), TeamRegistry(names),
                             np.array(periods)[order], t)


def write_csv(dataset: PeriodizedDataset, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Date", "HomeTeam", "AwayTeam", "FTHG", "FTAG", "Season", "Round"])
        for m in dataset.matches:
            w.writerow([m.date.strftime("%d/%m/%Y"), m.home_team, m.away_team,
                        m.home_goals, m.away_goals, m.season, m.round])


def write_truth(truth: Truth, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
