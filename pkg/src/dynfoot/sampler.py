"""No-U-turn Hamiltonian Monte Carlo with warmup adaptation.

Trajectories are built by repeated doubling with multinomial sampling of the
proposal and the generalised no-U-turn criterion, checked on every subtree
and across the seams between subtrees.  Warmup tunes the step size by dual
averaging and a diagonal inverse metric over doubling windows.

Coordinates listed in ``fixed`` are skipped by the Hamiltonian moves and
updated instead by a user kernel run after every transition.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AllChainsDiverged, NonFiniteInit

log = logging.getLogger(__name__)

MAX_ENERGY_ERROR = 1000.0


@dataclass(frozen=True)
class SamplerConfig:
    n_chains: int = 4
    n_warmup: int = 1000
    n_samples: int = 1000
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    init_jitter: float = 2.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_warmup < 1 or self.n_samples < 1:
            raise ValueError("n_warmup and n_samples must be at least 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.n_chains < 1 or self.max_tree_depth < 1:
            raise ValueError("n_chains and max_tree_depth must be positive")


@dataclass
class PosteriorDraws:
    """Post-warmup draws on the unconstrained scale, shape (chains, iterations, dim)."""

    draws: np.ndarray
    accept_stats: np.ndarray
    step_sizes: np.ndarray
    divergences: np.ndarray
    tree_depths: np.ndarray
    inv_metric: np.ndarray
    kernel_accept: np.ndarray | None = None
    seconds: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_chains(self):
        return self.draws.shape[0]

    @property
    def n_iterations(self):
        return self.draws.shape[1]

    @property
    def divergence_count(self):
        return self.divergences.sum(axis=1)

    def flat(self):
        return self.draws.reshape(-1, self.draws.shape[-1])

    def constrained(self, space):
        """Batched :class:`~dynfoot.space.ParameterView` over all draws."""
        return space.constrain(self.draws)


class _State:
    __slots__ = ("theta", "p", "lp", "grad")

    def __init__(self, theta, p, lp, grad):
        self.theta, self.p, self.lp, self.grad = theta, p, lp, grad


@dataclass
class _Tree:
    end: _State
    proposal: _State
    rho: np.ndarray
    p_beg: np.ndarray
    p_end: np.ndarray
    ps_beg: np.ndarray
    ps_end: np.ndarray
    log_weight: float
    valid: bool


class _Transition:
    """One NUTS transition; keeps the per-iteration counters."""

    def __init__(self, logp_grad, eps, inv_metric, rng, max_depth):
        self.logp_grad = logp_grad
        self.eps = eps
        self.inv_metric = inv_metric
        self.rng = rng
        self.max_depth = max_depth
        self.n_leapfrog = 0
        self.sum_accept = 0.0
        self.divergent = False

    def kinetic(self, p):
        return 0.5 * np.dot(p, self.inv_metric * p)

    def leapfrog(self, z, eps):
        p = z.p + 0.5 * eps * z.grad
        theta = z.theta + eps * self.inv_metric * p
        try:
            lp, grad = self.logp_grad(theta)
        except (FloatingPointError, ValueError, OverflowError):
            lp, grad = -np.inf, np.zeros_like(theta)
        if not np.isfinite(lp) or not np.all(np.isfinite(grad)):
            return _State(theta, p, -np.inf, np.zeros_like(theta))
        p = p + 0.5 * eps * grad
        return _State(theta, p, lp, grad)

    @staticmethod
    def turning(ps_minus, ps_plus, rho):
        return not (np.dot(ps_minus, rho) > 0 and np.dot(ps_plus, rho) > 0)

    def build(self, z, depth, direction, h0):
        if depth == 0:
            new = self.leapfrog(z, direction * self.eps)
            self.n_leapfrog += 1
            h = -new.lp + self.kinetic(new.p)
            if not np.isfinite(h):
                h = np.inf
            delta = h - h0
            if delta > MAX_ENERGY_ERROR:
                self.divergent = True
            self.sum_accept += 1.0 if delta <= 0 else math.exp(-delta)
            ps = self.inv_metric * new.p
            return _Tree(new, new, new.p.copy(), new.p, new.p, ps, ps, -delta, not self.divergent)
        first = self.build(z, depth - 1, direction, h0)
        if not first.valid:
            return first
        second = self.build(first.end, depth - 1, direction, h0)
        if not second.valid:
            second.log_weight = np.logaddexp(first.log_weight, second.log_weight)
            return second
        log_weight = np.logaddexp(first.log_weight, second.log_weight)
        proposal = first.proposal
        if self.rng.random() < math.exp(second.log_weight - log_weight):
            proposal = second.proposal
        rho = first.rho + second.rho
        turned = (self.turning(first.ps_beg, second.ps_end, rho)
                  or self.turning(first.ps_beg, second.ps_beg, first.rho + second.p_beg)
                  or self.turning(first.ps_end, second.ps_end, second.rho + first.p_end))
        return _Tree(second.end, proposal, rho, first.p_beg, second.p_end,
                     first.ps_beg, second.ps_end, log_weight, not turned)

    def run(self, theta, lp, grad):
        p0 = self.rng.standard_normal(theta.shape) / np.sqrt(self.inv_metric)
        z0 = _State(theta, p0, lp, grad)
        h0 = -lp + self.kinetic(p0)
        left = right = z0
        ps_left = ps_right = self.inv_metric * p0
        p_left = p_right = p0
        rho = p0.copy()
        log_weight = 0.0
        sample = z0
        depth = 0
        while depth < self.max_depth:
            direction = 1 if self.rng.random() < 0.5 else -1
            sub = self.build(right if direction > 0 else left, depth, direction, h0)
            depth += 1
            if not sub.valid:
                break
            if sub.log_weight > log_weight or self.rng.random() < math.exp(sub.log_weight - log_weight):
                sample = sub.proposal
            log_weight = np.logaddexp(log_weight, sub.log_weight)
            total = rho + sub.rho
            if direction > 0:
                turned = (self.turning(ps_left, sub.ps_end, total)
                          or self.turning(ps_left, sub.ps_beg, rho + sub.p_beg)
                          or self.turning(ps_right, sub.ps_end, sub.rho + p_right))
                right, p_right, ps_right = sub.end, sub.p_end, sub.ps_end
            else:
                turned = (self.turning(sub.ps_end, ps_right, total)
                          or self.turning(sub.ps_beg, ps_right, rho + sub.p_beg)
                          or self.turning(sub.ps_end, ps_left, sub.rho + p_left))
                left, p_left, ps_left = sub.end, sub.p_end, sub.ps_end
            rho = total
            if turned:
                break
        accept = self.sum_accept / max(self.n_leapfrog, 1)
        return sample, accept, depth


class _DualAveraging:
    def __init__(self, eps, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.restart(eps)

    def restart(self, eps):
        self.mu = math.log(10.0 * eps)
        self.h_bar = 0.0
        self.log_eps_bar = 0.0
        self.count = 0

    def update(self, accept):
        self.count += 1
        eta = 1.0 / (self.count + self.t0)
        self.h_bar = (1 - eta) * self.h_bar + eta * (self.target - accept)
        log_eps = self.mu - math.sqrt(self.count) / self.gamma * self.h_bar
        w = self.count ** -self.kappa
        self.log_eps_bar = w * log_eps + (1 - w) * self.log_eps_bar
        return math.exp(log_eps)

    @property
    def final(self):
        return math.exp(self.log_eps_bar)


def warmup_windows(n_warmup):
    """Ends of the metric windows: 15% initial buffer, 75% doubling windows, 10% final buffer."""
    if n_warmup < 20:
        return []
    start = int(0.15 * n_warmup)
    stop = n_warmup - int(0.10 * n_warmup)
    ends = []
    size = 25
    pos = start
    while pos + size < stop:
        # a window that would leave less than double its size is stretched to the end
        if pos + size + 2 * size > stop:
            break
        pos += size
        ends.append(pos)
        size *= 2
    ends.append(stop)
    return ends


def _initial_step_size(logp_grad, theta, lp, grad, inv_metric, rng):
    eps = 1.0
    trans = _Transition(logp_grad, eps, inv_metric, rng, 1)
    p = rng.standard_normal(theta.shape) / np.sqrt(inv_metric)
    h0 = -lp + trans.kinetic(p)

    def delta(e):
        z = trans.leapfrog(_State(theta, p, lp, grad), e)
        h = -z.lp + trans.kinetic(z.p)
        return h0 - h if np.isfinite(h) else -np.inf

    direction = 1 if delta(eps) > math.log(0.8) else -1
    for _ in range(100):
        d = delta(eps)
        if direction == 1 and not d > math.log(0.8):
            break
        if direction == -1 and not d < math.log(0.8):
            break
        eps = eps * 2.0 if direction == 1 else eps * 0.5
        if eps > 1e7 or eps < 1e-10:
            break
    return eps


def _run_chain(logp_grad, dim, config, rng, fixed, kernel, callback, chain_id):
    active = np.ones(dim, dtype=bool) if fixed is None else ~np.asarray(fixed, bool)
    theta = None
    for _ in range(100):
        cand = rng.normal(0.0, config.init_jitter, dim)
        try:
            lp, grad = logp_grad(cand)
        except (FloatingPointError, ValueError, OverflowError):
            continue
        if np.isfinite(lp) and np.all(np.isfinite(grad)):
            theta = cand
            break
    if theta is None:
        raise NonFiniteInit(f"chain {chain_id}: no finite log density in 100 initialisations")

    def sub_logp(full_theta):
        def f(x):
            t = full_theta.copy()
            t[active] = x
            value, g = logp_grad(t)
            return value, g[active]
        return f

    n_act = int(active.sum())
    inv_metric = np.ones(n_act)
    f = sub_logp(theta)
    lp, g = f(theta[active])
    eps = _initial_step_size(f, theta[active], lp, g, inv_metric, rng)
    adapt = _DualAveraging(eps, config.target_accept)
    window_ends = warmup_windows(config.n_warmup)
    window_start = int(0.15 * config.n_warmup)
    window = []

    total = config.n_warmup + config.n_samples
    draws = np.empty((config.n_samples, dim))
    accepts = np.empty(config.n_samples)
    depths = np.empty(config.n_samples, dtype=np.int64)
    divergent = np.zeros(config.n_samples, dtype=bool)
    kacc = np.empty(config.n_samples) if kernel is not None else None
    warm_div = 0
    for it in range(total):
        warm = it < config.n_warmup
        f = sub_logp(theta)
        lp, g = f(theta[active])
        trans = _Transition(f, eps, inv_metric, rng, config.max_tree_depth)
        z, acc, depth = trans.run(theta[active].copy(), lp, g)
        theta = theta.copy()
        theta[active] = z.theta
        ka = None
        if kernel is not None:
            theta, ka = kernel(theta, rng)
        if warm:
            warm_div += trans.divergent
            eps = adapt.update(acc)
            if window_ends and it >= window_start:
                window.append(theta[active])
                if it + 1 == window_ends[0]:
                    arr = np.asarray(window)
                    n = len(arr)
                    var = arr.var(axis=0, ddof=1) if n > 1 else np.ones(n_act)
                    inv_metric = (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
                    window = []
                    window_ends.pop(0)
                    f = sub_logp(theta)
                    lp, g = f(theta[active])
                    eps = _initial_step_size(f, theta[active], lp, g, inv_metric, rng)
                    adapt.restart(eps)
            if it + 1 == config.n_warmup:
                eps = adapt.final
        else:
            k = it - config.n_warmup
            draws[k] = theta
            accepts[k] = acc
            depths[k] = depth
            divergent[k] = trans.divergent
            if kacc is not None:
                kacc[k] = ka
        if callback is not None:
            callback(chain_id, it, warm)
    full_metric = np.ones(dim)
    full_metric[active] = inv_metric
    return draws, accepts, depths, divergent, eps, full_metric, kacc


def sample(logp_grad: Callable, space, config: SamplerConfig = SamplerConfig(), *,
           fixed=None, kernel=None, callback=None) -> PosteriorDraws:
    """Run ``config.n_chains`` independent chains.

    Parameters
    ----------
    logp_grad : callable
        ``theta -> (log density, gradient)`` on the unconstrained scale.
    space : int or object with ``dim``
    config : SamplerConfig
    fixed : bool array, optional
        Coordinates left out of the Hamiltonian moves.
    kernel : callable, optional
        ``(theta, rng) -> (theta, accept_rate)``; updates the ``fixed``
        coordinates after every transition.
    callback : callable, optional
        Progress hook called as ``callback(chain, iteration, is_warmup)``.

    Raises
    ------
    NonFiniteInit
        No finite starting point was found for some chain.
    AllChainsDiverged
        Some chain diverged on more than half of its post-warmup iterations.
    """
    import time

    dim = space if isinstance(space, (int, np.integer)) else space.dim
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)

    def one(c):
        start = time.perf_counter()
        out = _run_chain(logp_grad, dim, config, np.random.default_rng(seeds[c]), fixed, kernel, callback, c)
        return out + (time.perf_counter() - start,)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(config.n_jobs) as pool:
            results = list(pool.map(one, range(config.n_chains)))
    else:
        results = [one(c) for c in range(config.n_chains)]
    draws = PosteriorDraws(
        draws=np.stack([r[0] for r in results]),
        accept_stats=np.stack([r[1] for r in results]),
        tree_depths=np.stack([r[2] for r in results]),
        divergences=np.stack([r[3] for r in results]),
        step_sizes=np.array([r[4] for r in results]),
        inv_metric=np.stack([r[5] for r in results]),
        kernel_accept=np.stack([r[6] for r in results]) if kernel is not None else None,
        seconds=np.array([r[7] for r in results]),
    )
    rates = draws.divergences.mean(axis=1)
    bad = np.flatnonzero(rates > 0.5)
    if len(bad):
        raise AllChainsDiverged(f"chains {bad.tolist()} diverged on more than half of their iterations")
    if draws.divergences.any():
        log.warning("%d divergent transitions after warmup", int(draws.divergences.sum()))
    return draws
