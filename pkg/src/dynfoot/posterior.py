"""Log posterior with analytic gradient, and the precision update kernel."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp
from scipy.stats import t as student_t

from .data import PeriodizedDataset
from .errors import NonFinite
from .likelihoods import match_terms
from .space import Dynamics, ModelSpec, ParameterSpace, _spike_slab


class Posterior:
    """Callable ``theta -> (log posterior, gradient)`` over one training set.

    Abilities of a match come from the match's period.  The dataset is only
    read, so one instance may be evaluated from several threads.
    """

    def __init__(self, data: PeriodizedDataset, spec: ModelSpec):
        if len(data.registry) != spec.n_teams or data.n_periods != spec.n_periods:
            raise ValueError("dataset and spec disagree on teams or periods")
        self.spec = spec
        self.space = ParameterSpace(spec)
        self.n_matches = len(data)
        self.x = data.home_goals.astype(float)
        self.y = data.away_goals.astype(float)
        t = spec.n_periods
        self._home_cell = data.home_idx * t + data.period_idx
        self._away_cell = data.away_idx * t + data.period_idx
        self._cells = spec.n_teams * t

    def log_likelihood(self, theta):
        return self._likelihood(np.asarray(theta, float))[0]

    def _likelihood(self, theta):
        space = self.space
        grad = np.zeros(space.dim)
        if self.n_matches == 0:
            return 0.0, grad
        v = space.constrain(theta)
        att = v.att.reshape(-1)
        dfn = v.def_.reshape(-1)
        hc, ac = self._home_cell, self._away_cell
        ll1 = theta[0] + theta[1] + att[hc] + dfn[ac]
        ll2 = theta[0] + att[ac] + dfn[hc]
        extras = {name: theta[2 + k] for k, name in enumerate(space.extras)}
        logp, g1, g2, ge = match_terms(self.spec.family, self.x, self.y, ll1, ll2, extras)
        grad[0] = g1.sum() + g2.sum()
        grad[1] = g1.sum()
        for k, name in enumerate(space.extras):
            grad[2 + k] = np.sum(ge[name])
        n, t = self.spec.n_teams, self.spec.n_periods
        g_att = (np.bincount(hc, g1, self._cells) + np.bincount(ac, g2, self._cells)).reshape(n, t)
        g_def = (np.bincount(ac, g1, self._cells) + np.bincount(hc, g2, self._cells)).reshape(n, t)
        grad += space.ability_grad(theta, g_att, g_def)
        return float(np.sum(logp)), grad

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            raise NonFinite("theta has non-finite entries")
        # far-out leapfrog states overflow; they come back as -inf and are rejected
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            lp, gp = self.space.log_prior_grad(theta)
            try:
                ll, gl = self._likelihood(theta)
            except NonFinite:
                return -np.inf, np.zeros_like(theta)
        total = lp + ll
        if not np.isfinite(total):
            return -np.inf, np.zeros_like(theta)
        return total, gp + gl


def log_posterior(theta, data: PeriodizedDataset, spec: ModelSpec):
    return Posterior(data, spec)(theta)


class PrecisionKernel:
    """Independence Metropolis-Hastings update of every log-precision.

    Given the abilities, each precision ``p`` of the weighted regime only
    enters through ``(n_teams - 1)/2 log p - p S / 2`` (``S`` the sum of squared
    period-to-period steps) plus its spike/slab prior.  That one-dimensional
    conditional is tabulated on a grid in ``log p`` that resolves the narrow
    spike; proposals come from the tabulated density mixed with a wide
    Student-t for full support, so chains jump between spike and slab.

    The update holds the abilities fixed, so the non-centred step
    coordinates of the affected period are rescaled with the precision.
    """

    def __init__(self, space: ParameterSpace, n_grid: int = 4000, defensive_weight: float = 0.05):
        if space.spec.dynamics is not Dynamics.WEIGHTED:
            raise ValueError("the precision kernel is defined for weighted dynamics")
        self.space = space
        hp = space.spec.hyper
        edges = np.linspace(-12.0, 8.0, n_grid + 1)
        if hp.mu_spike - 8 * hp.sd_spike > 0:
            fine = np.log(hp.mu_spike + hp.sd_spike * np.linspace(-8.0, 8.0, 401))
            edges = np.union1d(edges, fine)
        self.edges = edges
        self.width = np.diff(edges)
        self.mid = 0.5 * (edges[1:] + edges[:-1])
        dens, _ = _spike_slab(np.exp(self.mid), hp)
        self._static = dens + self.mid + np.log(self.width)
        self.defensive_weight = defensive_weight
        self._tail = student_t(df=3, loc=0.0, scale=5.0)

    def log_target(self, u, s, n):
        dens, _ = _spike_slab(np.exp(u), self.space.spec.hyper)
        return 0.5 * (n - 1) * u - 0.5 * np.exp(u) * s + dens + u

    def _log_proposal(self, u, log_cell, lse):
        cell = np.clip(np.searchsorted(self.edges, u, side="right") - 1, 0, len(self.width) - 1)
        inside = (u >= self.edges[0]) & (u < self.edges[-1])
        grid = np.where(inside, log_cell[cell] - lse - np.log(self.width[cell]), -np.inf)
        return np.logaddexp(math.log1p(-self.defensive_weight) + grid,
                            math.log(self.defensive_weight) + self._tail.logpdf(u))

    def __call__(self, theta, rng: np.random.Generator):
        space = self.space
        n, t = space.spec.n_teams, space.spec.n_periods
        theta = np.array(theta, dtype=float)
        v = space.constrain(theta)
        squares = np.concatenate([
            np.sum(np.diff(v.att, axis=1) ** 2, axis=0),
            np.sum(np.diff(v.def_, axis=1) ** 2, axis=0),
        ])
        n_accept = 0
        m = t - 1
        for k, s in enumerate(squares):
            j = space.prec_start + k
            log_cell = self._static + 0.5 * (n - 1) * self.mid - 0.5 * np.exp(self.mid) * s
            lse = logsumexp(log_cell)
            if rng.random() < self.defensive_weight:
                new = float(self._tail.rvs(random_state=rng))
            else:
                probs = np.exp(log_cell - lse)
                cell = min(int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum())), len(probs) - 1)
                new = self.edges[cell] + rng.random() * self.width[cell]
            old = theta[j]
            log_ratio = (self.log_target(new, s, n) - self.log_target(old, s, n)
                         + self._log_proposal(old, log_cell, lse) - self._log_proposal(new, log_cell, lse))
            if np.log(rng.random()) < log_ratio:
                b, step = divmod(k, m)
                lo = (space.att_start, space.def_start)[b] + (step + 1) * (n - 1)
                theta[lo:lo + n - 1] *= math.exp(0.5 * (new - old))
                theta[j] = new
                n_accept += 1
        return theta, n_accept / max(len(squares), 1)


def fit(data: PeriodizedDataset, spec: ModelSpec, config=None, callback=None):
    """Sample the posterior of ``spec`` given ``data``.

    Weighted dynamics hand the precisions to :class:`PrecisionKernel`; all
    other coordinates, and every coordinate of the other regimes, move by
    NUTS.
    """
    from .sampler import SamplerConfig, sample

    config = config or SamplerConfig()
    post = Posterior(data, spec)
    fixed = kernel = None
    if spec.dynamics is Dynamics.WEIGHTED:
        fixed = np.zeros(post.space.dim, dtype=bool)
        fixed[post.space.precision_slice] = True
        kernel = PrecisionKernel(post.space)
    return sample(post, post.space, config, fixed=fixed, kernel=kernel, callback=callback)
