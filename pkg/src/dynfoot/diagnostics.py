"""Rank-normalised split R-hat and bulk/tail effective sample sizes.

All functions take draws of one scalar quantity shaped (chains, iterations).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


def _check(draws):
    x = np.asarray(draws, dtype=float)
    if x.ndim != 2:
        raise ValueError("draws must be shaped (chains, iterations)")
    if x.shape[1] < 4:
        raise ValueError("need at least 4 draws per chain")
    return x


def is_degenerate(draws) -> bool:
    """True when the draws carry no variance to diagnose."""
    x = np.asarray(draws, dtype=float)
    return bool(np.all(x == x.flat[0])) or not np.all(np.isfinite(x))


def split_chains(x):
    half = x.shape[1] // 2
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def rank_normalize(x):
    ranks = rankdata(x, method="average", axis=None).reshape(x.shape)
    return ndtri((ranks - 0.375) / (x.size + 0.25))


def _rhat_basic(x):
    n = x.shape[1]
    within = x.var(axis=1, ddof=1).mean()
    between = n * x.mean(axis=1).var(ddof=1)
    if within == 0:
        return 1.0
    return float(np.sqrt(((n - 1) / n * within + between / n) / within))


def split_rhat(draws, rank: bool = True) -> float:
    """Rank-normalised split R-hat (maximum of the bulk and folded versions).

    Returns 1.0 for draws without variance.  With ``rank=False`` the classic
    split R-hat on the raw draws is returned instead; rank normalisation
    bounds R-hat for fully separated chains (about 1.83 for two chains), the
    raw version does not.
    """
    x = _check(draws)
    if x.shape[0] < 1 or is_degenerate(x):
        return 1.0
    s = split_chains(x)
    if not rank:
        return _rhat_basic(s)
    bulk = _rhat_basic(rank_normalize(s))
    folded = np.abs(s - np.median(s))
    tail = 1.0 if is_degenerate(folded) else _rhat_basic(rank_normalize(folded))
    return max(bulk, tail)


def _autocov(x):
    n = x.shape[1]
    centred = x - x.mean(axis=1, keepdims=True)
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(centred, n=size, axis=1)
    acov = np.fft.irfft(spec * np.conj(spec), n=size, axis=1)[:, :n]
    return acov / n


def _ess(x):
    """ESS with Geyer's initial monotone sequence truncation."""
    m, n = x.shape
    if is_degenerate(x):
        return float(m * n)
    acov = _autocov(x)
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return float(m * n)
    rho = np.zeros(n)
    rho[0] = 1.0
    even, odd = 1.0, 1.0 - (mean_var - acov[:, 1].mean()) / var_plus
    rho[1] = odd
    t = 1
    while t < n - 3 and even + odd > 0:
        even = 1.0 - (mean_var - acov[:, t + 1].mean()) / var_plus
        odd = 1.0 - (mean_var - acov[:, t + 2].mean()) / var_plus
        if even + odd >= 0:
            rho[t + 1], rho[t + 2] = even, odd
        t += 2
    max_t = t - 2
    if even > 0:
        rho[max_t + 1] = even
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = rho[t + 2] = 0.5 * (rho[t - 1] + rho[t])
        t += 2
    tau = -1.0 + 2.0 * rho[: max_t + 1].sum() + rho[max_t + 1: max_t + 2].sum()
    tau = max(tau, 1.0 / np.log10(m * n))
    return float(min(m * n / tau, m * n))


def ess_bulk(draws) -> float:
    """Bulk ESS: autocorrelation ESS of the rank-normalised split chains.

    Draws without variance return the total draw count (see
    :func:`is_degenerate` for the flag).
    """
    x = _check(draws)
    if is_degenerate(x):
        return float(x.size)
    return _ess(rank_normalize(split_chains(x)))


def ess_tail(draws) -> float:
    """Tail ESS: the smaller ESS of the 5% and 95% quantile indicators."""
    x = _check(draws)
    if is_degenerate(x):
        return float(x.size)
    lo, hi = np.quantile(x, [0.05, 0.95])
    return min(_ess(split_chains((x <= lo).astype(float))),
               _ess(split_chains((x <= hi).astype(float))))


@dataclass
class Diagnostics:
    names: list[str]
    rhat: np.ndarray
    ess_bulk: np.ndarray
    ess_tail: np.ndarray
    degenerate: np.ndarray
    divergences: int

    @property
    def max_rhat(self):
        return float(np.max(self.rhat, initial=1.0))

    @property
    def min_ess_bulk(self):
        return float(np.min(self.ess_bulk)) if len(self.ess_bulk) else float("nan")

    @property
    def min_ess_tail(self):
        return float(np.min(self.ess_tail)) if len(self.ess_tail) else float("nan")

    def rows(self):
        for k, name in enumerate(self.names):
            yield name, self.rhat[k], self.ess_bulk[k], self.ess_tail[k], bool(self.degenerate[k])


def summarize(draws, names=None, divergences=0) -> Diagnostics:
    """Per-parameter diagnostics for draws shaped (chains, iterations, params)."""
    x = np.asarray(draws, dtype=float)
    names = list(names) if names is not None else [f"p{k}" for k in range(x.shape[-1])]
    cols = [x[..., k] for k in range(x.shape[-1])]
    return Diagnostics(
        names=names,
        rhat=np.array([split_rhat(c) for c in cols]),
        ess_bulk=np.array([ess_bulk(c) for c in cols]),
        ess_tail=np.array([ess_tail(c) for c in cols]),
        degenerate=np.array([is_degenerate(c) for c in cols], dtype=bool),
        divergences=int(divergences),
    )
