"""Log probability mass functions for the six goal-based score models.

All functions broadcast over numpy arrays.  Mixtures and finite sums are
accumulated in log space; the modified Bessel function is evaluated from its
ascending series rather than through a special-function library so that
``log I_h`` stays finite for large arguments.

The ``*_terms`` functions at the bottom return per-match log-likelihoods
together with their derivatives with respect to ``log(lambda1)``,
``log(lambda2)`` and the family's unconstrained parameters; they drive the
posterior gradient.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

# relative cut-off of the Bessel series, in nats
_SERIES_DEPTH = 40.0
# above this many goals the negative binomial uses gammaln differences
_RISING_SUM_LIMIT = 200


class Family(str, enum.Enum):
    DP = "dp"
    BP = "bp"
    DIBP = "dibp"
    NB = "nb"
    SM = "sm"
    ZISM = "zism"

    @property
    def uses_difference(self) -> bool:
        return self in (Family.SM, Family.ZISM)

    @property
    def extras(self) -> tuple[str, ...]:
        """Family-specific parameters, in layout order."""
        return _EXTRAS[self]


_EXTRAS = {
    Family.DP: (),
    Family.BP: ("eta0",),
    Family.DIBP: ("eta0", "omega", "xi"),
    Family.NB: ("gamma",),
    Family.SM: (),
    Family.ZISM: ("omega",),
}


@dataclass(frozen=True)
class ScoringRates:
    lambda1: float
    lambda2: float
    lambda3: float = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.lambda1) <= 0) or np.any(np.asarray(self.lambda2) <= 0):
            raise ValueError("lambda1 and lambda2 must be positive")
        if np.any(np.asarray(self.lambda3) < 0):
            raise ValueError("lambda3 must be non-negative")


@dataclass(frozen=True)
class FamilyParams:
    family: Family
    gamma: float | None = None
    omega: float | None = None
    xi: float | None = None
    eta0: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.omega is not None and not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if self.xi is not None and self.xi <= 0:
            raise ValueError("xi must be positive")


def log_scoring_rates(beta0, home, att_home, def_away, att_away, def_home):
    """Log expected goals of the home and away side."""
    return beta0 + home + att_home + def_away, beta0 + att_away + def_home


def _log(v):
    with np.errstate(divide="ignore"):
        return np.log(v)


def _log_poisson(k, log_rate):
    k = np.asarray(k, dtype=float)
    rate = np.exp(log_rate)
    # k * log(rate) is 0 when k == 0, even for rate == 0
    term = np.where(k > 0, k * np.where(k > 0, log_rate, 0.0), 0.0)
    return term - rate - gammaln(k + 1)


def log_pmf_double_poisson(x, y, rates: ScoringRates):
    return _log_poisson(x, _log(rates.lambda1)) + _log_poisson(y, _log(rates.lambda2))


def _bp_sum(x, y, log_ratio):
    """log of sum_k C(x,k) C(y,k) k! r^k and its weighted mean k.

    ``log_ratio`` is ``log(lambda3 / (lambda1 * lambda2))`` and may be -inf.
    """
    x, y, log_ratio = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float), np.asarray(log_ratio, float))
    kmax = int(np.minimum(x, y).max(initial=0))
    k = np.arange(kmax + 1, dtype=float).reshape((-1,) + (1,) * x.ndim)
    valid = k <= np.minimum(x, y)
    with np.errstate(invalid="ignore"):
        t = (gammaln(x + 1) - gammaln(np.maximum(x - k, 0) + 1)
             + gammaln(y + 1) - gammaln(np.maximum(y - k, 0) + 1)
             - gammaln(k + 1) + np.where(k > 0, k * log_ratio, 0.0))
    t = np.where(valid, t, -np.inf)
    top = t.max(axis=0)
    w = np.exp(t - top)
    s = w.sum(axis=0)
    return top + np.log(s), (w * k).sum(axis=0) / s


def log_pmf_bivariate_poisson(x, y, rates: ScoringRates):
    l1, l2, l3 = (np.asarray(v, float) for v in (rates.lambda1, rates.lambda2, rates.lambda3))
    ll1, ll2, ll3 = np.log(l1), np.log(l2), _log(l3)
    log_s, _ = _bp_sum(x, y, ll3 - ll1 - ll2)
    return _log_poisson(x, ll1) + _log_poisson(y, ll2) - l3 + log_s


def log_pmf_dibp(x, y, rates: ScoringRates, omega, xi):
    """Diagonally inflated bivariate Poisson; ties get extra Poisson(xi) mass."""
    base = _log(1.0 - np.asarray(omega, float)) + log_pmf_bivariate_poisson(x, y, rates)
    diag = _log(omega) + _log_poisson(x, np.log(xi))
    return np.where(np.asarray(x) == np.asarray(y), np.logaddexp(base, diag), base)


def _log_rising_ratio(x, log_rate, size):
    """log of Gamma(x + r) / (Gamma(r) (r + lambda)^x) and d/dr of log Gamma(x + r)/Gamma(r)."""
    x = np.asarray(x, float)
    rate = np.exp(log_rate)
    xmax = int(np.max(x, initial=0))
    if xmax <= _RISING_SUM_LIMIT:
        j = np.arange(xmax, dtype=float).reshape((-1,) + (1,) * np.ndim(x + rate + size))
        mask = j < x
        val = np.where(mask, np.log1p((j - rate) / (size + rate)), 0.0).sum(axis=0)
        dig = np.where(mask, 1.0 / (size + j), 0.0).sum(axis=0)
        return val, dig
    from scipy.special import digamma

    val = gammaln(x + size) - gammaln(size) - x * np.log(size + rate)
    return val, digamma(x + size) - digamma(size)


def _log_negbin(x, log_rate, gamma):
    size = 1.0 / np.asarray(gamma, float)
    rate = np.exp(log_rate)
    rising, _ = _log_rising_ratio(x, log_rate, size)
    x = np.asarray(x, float)
    return rising - gammaln(x + 1) + np.where(x > 0, x * log_rate, 0.0) - size * np.log1p(rate / size)


def log_pmf_negbin_pair(x, y, rates: ScoringRates, gamma):
    """Independent negative binomials with mean lambda and variance lambda (1 + gamma lambda)."""
    return _log_negbin(x, _log(rates.lambda1), gamma) + _log_negbin(y, _log(rates.lambda2), gamma)


def log_bessel_i(order: int, z: float) -> float:
    """log I_order(z) from the ascending series, summed in log space.

    Terms are added until one falls 40 nats below the largest seen so far.
    """
    if z <= 0:
        raise ValueError("z must be positive")
    h = abs(int(order))
    log_half = math.log(z / 2.0)
    top = -math.inf
    acc = 0.0  # sum of exp(term - top)
    m = 0
    while True:
        term = (2 * m + h) * log_half - math.lgamma(m + 1) - math.lgamma(m + h + 1)
        if term > top:
            acc = acc * math.exp(top - term) + 1.0
            top = term
        else:
            acc += math.exp(term - top)
            if term < top - _SERIES_DEPTH:
                break
        m += 1
    return top + math.log(acc)


def log_bessel_i_array(order, z):
    """Vectorised ``log_bessel_i`` on a fixed number of series terms."""
    order, z = np.broadcast_arrays(np.abs(np.asarray(order)).astype(float), np.asarray(z, float))
    zmax = float(np.max(z, initial=0.0))
    n_terms = int(zmax / 2 + 10 * math.sqrt(zmax) + 50)
    m = np.arange(n_terms, dtype=float).reshape((-1,) + (1,) * z.ndim)
    t = (2 * m + order) * np.log(z / 2.0) - gammaln(m + 1) - gammaln(m + order + 1)
    top = t.max(axis=0)
    return top + np.log(np.exp(t - top).sum(axis=0))


def log_pmf_skellam(z, rates: ScoringRates):
    l1, l2 = np.asarray(rates.lambda1, float), np.asarray(rates.lambda2, float)
    z = np.asarray(z)
    arg = 2.0 * np.sqrt(l1 * l2)
    return -(l1 + l2) + 0.5 * z * (np.log(l1) - np.log(l2)) + log_bessel_i_array(np.abs(z), arg)


def log_pmf_zi_skellam(z, rates: ScoringRates, omega):
    omega = np.asarray(omega, float)
    base = _log(1.0 - omega) + log_pmf_skellam(z, rates)
    return np.where(np.asarray(z) == 0, np.logaddexp(base, _log(omega)), base)


def log_pmf(family, x, y, rates: ScoringRates, params: FamilyParams | None = None):
    """Dispatch on the family; Skellam families score ``x - y``."""
    family = Family(family)
    p = params or FamilyParams(family)
    if family is Family.DP:
        return log_pmf_double_poisson(x, y, rates)
    if family is Family.BP:
        return log_pmf_bivariate_poisson(x, y, rates)
    if family is Family.DIBP:
        return log_pmf_dibp(x, y, rates, p.omega, p.xi)
    if family is Family.NB:
        return log_pmf_negbin_pair(x, y, rates, p.gamma)
    z = np.asarray(x) - np.asarray(y)
    if family is Family.SM:
        return log_pmf_skellam(z, rates)
    return log_pmf_zi_skellam(z, rates, p.omega)


# ---------------------------------------------------------------------------
# per-match terms with derivatives


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def poisson_terms(x, y, ll1, ll2):
    return (_log_poisson(x, ll1) + _log_poisson(y, ll2),
            x - np.exp(ll1), y - np.exp(ll2), {})


def bivariate_terms(x, y, ll1, ll2, eta0):
    l3 = math.exp(eta0)
    log_s, mean_k = _bp_sum(x, y, eta0 - ll1 - ll2)
    logp = _log_poisson(x, ll1) + _log_poisson(y, ll2) - l3 + log_s
    g1 = x - np.exp(ll1) - mean_k
    g2 = y - np.exp(ll2) - mean_k
    return logp, g1, g2, {"eta0": mean_k - l3}


def dibp_terms(x, y, ll1, ll2, eta0, logit_omega, log_xi):
    bp, g1, g2, extra = bivariate_terms(x, y, ll1, ll2, eta0)
    omega = float(_sigmoid(logit_omega))
    log_1m = -np.logaddexp(0.0, logit_omega)
    log_om = -np.logaddexp(0.0, -logit_omega)
    xi = math.exp(log_xi)
    base = log_1m + bp
    diag = log_om + _log_poisson(x, log_xi)
    tie = x == y
    logp = np.where(tie, np.logaddexp(base, diag), base)
    # responsibility of the bivariate component
    resp = np.where(tie, np.exp(base - logp), 1.0)
    return logp, resp * g1, resp * g2, {
        "eta0": resp * extra["eta0"],
        "omega": resp * (-omega) + (1.0 - resp) * (1.0 - omega),
        "xi": (1.0 - resp) * (x - xi),
    }


def negbin_terms(x, y, ll1, ll2, log_gamma):
    size = math.exp(-log_gamma)
    logp = 0.0
    grads = []
    dgamma = 0.0
    for k, ll in ((x, ll1), (y, ll2)):
        rate = np.exp(ll)
        rising, dig = _log_rising_ratio(k, ll, size)
        logp = logp + rising - gammaln(k + 1.0) + np.where(k > 0, k * ll, 0.0) - size * np.log1p(rate / size)
        grads.append(size * (k - rate) / (size + rate))
        dgamma = dgamma - size * (dig - np.log1p(rate / size) + (rate - k) / (size + rate))
    return logp, grads[0], grads[1], {"gamma": dgamma}


def skellam_terms(x, y, ll1, ll2):
    z = x - y
    h = np.abs(z)
    l1, l2 = np.exp(ll1), np.exp(ll2)
    arg = 2.0 * np.exp(0.5 * (ll1 + ll2))
    log_i = log_bessel_i_array(h, arg)
    ratio = np.exp(log_bessel_i_array(h + 1, arg) - log_i)
    # d log I_h(s) / d log s = s I_{h+1}/I_h + h, and d log s / d ll = 1/2
    common = 0.5 * (arg * ratio + h)
    logp = -(l1 + l2) + 0.5 * z * (ll1 - ll2) + log_i
    return logp, -l1 + 0.5 * z + common, -l2 - 0.5 * z + common, {}


def zi_skellam_terms(x, y, ll1, ll2, logit_omega):
    sm, g1, g2, _ = skellam_terms(x, y, ll1, ll2)
    omega = float(_sigmoid(logit_omega))
    log_1m = -np.logaddexp(0.0, logit_omega)
    log_om = -np.logaddexp(0.0, -logit_omega)
    base = log_1m + sm
    tie = x == y
    logp = np.where(tie, np.logaddexp(base, log_om), base)
    resp = np.where(tie, np.exp(base - logp), 1.0)
    return logp, resp * g1, resp * g2, {"omega": resp * (-omega) + (1.0 - resp) * (1.0 - omega)}


def match_terms(family: Family, x, y, ll1, ll2, unconstrained_extras: dict):
    """Per-match log-likelihood and derivatives.

    ``unconstrained_extras`` holds the family parameters on the sampler's
    scale: ``eta0`` as is, ``gamma`` and ``xi`` as logs, ``omega`` as a
    logit.  The returned gradient dict uses the same keys and scales.
    """
    u = unconstrained_extras
    if family is Family.DP:
        return poisson_terms(x, y, ll1, ll2)
    if family is Family.BP:
        return bivariate_terms(x, y, ll1, ll2, u["eta0"])
    if family is Family.DIBP:
        return dibp_terms(x, y, ll1, ll2, u["eta0"], u["omega"], u["xi"])
    if family is Family.NB:
        return negbin_terms(x, y, ll1, ll2, u["gamma"])
    if family is Family.SM:
        return skellam_terms(x, y, ll1, ll2)
    return zi_skellam_terms(x, y, ll1, ll2, u["omega"])
