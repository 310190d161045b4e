"""Parameter layout, constraining transforms and priors.

The sampler works on an unconstrained vector ``theta``.  Its layout is

    beta0, home, [family extras], att free block, def free block, [precisions]

Ability blocks are period-major with ``n_teams - 1`` free coordinates per
period; the last team's ability is minus the sum of the others, so each
period's abilities sum to zero exactly.  Positive parameters live on the log
scale and ``omega`` on the logit scale.

Evolution precisions follow the convention ``beta[t] ~ N(beta[t-1], 1/p)``:
``1/p`` is the variance of one period-to-period step.  For the dynamic
regimes the free coordinates of periods 2..T are non-centred: they hold the
step ``z`` in an orthonormal basis ``Q`` of the zero-sum subspace, and
``beta[t] = beta[t-1] + Q z / sqrt(p)``.  Since ``|Q z| = |z|`` the step
prior becomes ``z ~ N(0, I)``; the posterior is unchanged, but the funnel
between abilities and a weakly identified precision disappears.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.linalg import helmert
from scipy.special import log_ndtr

from .errors import ConfigError, NonFinite
from .likelihoods import Family

_LOG_2PI = math.log(2.0 * math.pi)


class Dynamics(str, enum.Enum):
    STATIC = "static"
    OWEN = "owen"
    EGIDI = "egidi"
    WEIGHTED = "weighted"


@dataclass(frozen=True)
class HyperParams:
    mu_spike: float = 100.0
    sd_spike: float = 0.1
    mu_slab: float = 0.0
    sd_slab: float = 5.0
    p_slab: float = 0.99
    cauchy_scale: float = 5.0
    home_prior_sd: float = 5.0
    init_ability_sd: float = 2.0
    intercept_prior_sd: float = 5.0

    def __post_init__(self):
        if not 0 < self.sd_spike < self.sd_slab:
            raise ConfigError("need 0 < sd_spike < sd_slab")
        if not 0.0 <= self.p_slab <= 1.0:
            raise ConfigError("p_slab must lie in [0, 1]")
        for name in ("cauchy_scale", "home_prior_sd", "init_ability_sd", "intercept_prior_sd"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    dynamics: Dynamics
    n_teams: int
    n_periods: int
    hyper: HyperParams = field(default_factory=HyperParams)

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", Family(self.family))
            object.__setattr__(self, "dynamics", Dynamics(self.dynamics))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.n_teams < 2:
            raise ConfigError("need at least two teams")
        if self.n_periods < 1:
            raise ConfigError("need at least one period")
        if self.dynamics is Dynamics.WEIGHTED and self.n_periods < 2:
            raise ConfigError("weighted dynamics needs at least two periods")


@dataclass
class ParameterView:
    """Named, constrained parameters.

    Every field may carry leading batch dimensions (one per draw, say);
    ``att`` and ``def_`` end in ``(n_teams, n_periods)``.
    """

    beta0: np.ndarray
    home: np.ndarray
    att: np.ndarray
    def_: np.ndarray
    eta0: np.ndarray | None = None
    gamma: np.ndarray | None = None
    omega: np.ndarray | None = None
    xi: np.ndarray | None = None
    sigma: np.ndarray | None = None
    sigma_att: np.ndarray | None = None
    sigma_def: np.ndarray | None = None
    phi_att: np.ndarray | None = None
    phi_def: np.ndarray | None = None


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def _log_half_cauchy(x, scale):
    return math.log(2.0 / (math.pi * scale)) - np.log1p((x / scale) ** 2)


def _log_normal(x, sd):
    return -0.5 * (x / sd) ** 2 - math.log(sd) - 0.5 * _LOG_2PI


def _log_truncnorm(phi, mu, sd):
    return _log_normal(phi - mu, sd) - log_ndtr(mu / sd)


def log_spike_slab(phi, hyper: HyperParams = HyperParams()):
    """Log density of the zero-truncated spike/slab normal mixture."""
    return _spike_slab(phi, hyper)[0]


def _spike_slab(phi, hyper):
    phi = np.asarray(phi, float)
    with np.errstate(divide="ignore"):
        spike = math.log1p(-hyper.p_slab) if hyper.p_slab < 1 else -math.inf
        slab = math.log(hyper.p_slab) if hyper.p_slab > 0 else -math.inf
    spike = spike + _log_truncnorm(phi, hyper.mu_spike, hyper.sd_spike)
    slab = slab + _log_truncnorm(phi, hyper.mu_slab, hyper.sd_slab)
    total = np.logaddexp(spike, slab)
    resp = np.exp(spike - total)
    dphi = (resp * -(phi - hyper.mu_spike) / hyper.sd_spike**2
            + (1.0 - resp) * -(phi - hyper.mu_slab) / hyper.sd_slab**2)
    total = np.where(phi > 0, total, -np.inf)
    return total, dphi


def _precision_names(spec):
    if spec.dynamics is Dynamics.OWEN:
        return ["sigma"]
    if spec.dynamics is Dynamics.EGIDI:
        return ["sigma_att", "sigma_def"]
    if spec.dynamics is Dynamics.WEIGHTED:
        periods = range(2, spec.n_periods + 1)
        return [f"phi_att[{t}]" for t in periods] + [f"phi_def[{t}]" for t in periods]
    return []


class ParameterSpace:
    """Bijection between ``theta`` and :class:`ParameterView` for one spec."""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        n, t = spec.n_teams, spec.n_periods
        self.extras = spec.family.extras
        self.n_free = (n - 1) * t
        self.att_start = 2 + len(self.extras)
        self.def_start = self.att_start + self.n_free
        self.prec_start = self.def_start + self.n_free
        self.precision_names = _precision_names(spec)
        self.dim = self.prec_start + len(self.precision_names)
        self.basis = helmert(n).T  # (n, n - 1), orthonormal, columns sum to 0
        self._log_det_basis = float(np.linalg.slogdet(self.basis[:-1])[1])

    def __repr__(self):
        s = self.spec
        return f"ParameterSpace({s.family.value}/{s.dynamics.value}, teams={s.n_teams}, periods={s.n_periods}, dim={self.dim})"

    @property
    def precision_slice(self):
        return slice(self.prec_start, self.dim)

    @property
    def unconstrained_names(self):
        names = ["beta0", "home"]
        names += [f"log_{e}" if e in ("gamma", "xi") else ("logit_omega" if e == "omega" else e) for e in self.extras]
        n, t = self.spec.n_teams, self.spec.n_periods
        for kind in ("att", "def"):
            names += [f"{kind}[{i + 1},{p + 1}]" for p in range(t) for i in range(n - 1)]
        names += [f"log_{p}" for p in self.precision_names]
        return names

    @property
    def constrained_names(self):
        """Names of :meth:`flatten` columns (abilities include every team)."""
        n, t = self.spec.n_teams, self.spec.n_periods
        names = ["beta0", "home", *self.extras]
        for kind in ("att", "def"):
            names += [f"{kind}[{i + 1},{p + 1}]" for i in range(n) for p in range(t)]
        return names + self.precision_names

    # -- transforms ---------------------------------------------------------

    @property
    def noncentred(self):
        return self.spec.dynamics is not Dynamics.STATIC and self.spec.n_periods > 1

    def _free(self, block):
        n, t = self.spec.n_teams, self.spec.n_periods
        return block.reshape(block.shape[:-1] + (t, n - 1))

    def _abilities(self, block, prec=None):
        """Full (…, n_teams, n_periods) abilities from one free block.

        ``prec`` holds the step precisions (…, n_periods - 1) of the block and
        is only used by the dynamic regimes.
        """
        free = self._free(block)
        first = np.concatenate([free, -free.sum(axis=-1, keepdims=True)], axis=-1)
        if prec is None or not self.noncentred:
            return np.swapaxes(first, -1, -2)
        steps = (free[..., 1:, :] @ self.basis.T) / np.sqrt(prec)[..., None]
        full = np.cumsum(np.concatenate([first[..., :1, :], steps], axis=-2), axis=-2)
        return np.swapaxes(full, -1, -2)

    def _free_from_abilities(self, block, prec):
        n, t = self.spec.n_teams, self.spec.n_periods
        rows = np.swapaxes(np.asarray(block, float), -1, -2)  # (…, t, n)
        free = rows[..., : n - 1].copy()
        if self.noncentred:
            steps = np.diff(rows, axis=-2)
            free[..., 1:, :] = (steps @ self.basis) * np.sqrt(prec)[..., None]
        return free.reshape(free.shape[:-2] + (t * (n - 1),))

    def _precisions(self, u):
        """Step precisions (…, 2, n_periods - 1) from log-precision coordinates."""
        u = np.asarray(u, float)
        t = self.spec.n_periods
        lead = u.shape[:-1]
        dyn = self.spec.dynamics
        if dyn is Dynamics.OWEN:
            return np.broadcast_to(np.exp(u)[..., None, :], lead + (2, t - 1))
        if dyn is Dynamics.EGIDI:
            return np.broadcast_to(np.exp(u)[..., :, None], lead + (2, t - 1))
        if dyn is Dynamics.WEIGHTED:
            return np.exp(u).reshape(lead + (2, t - 1))
        return np.ones(lead + (2, t - 1))

    def constrain(self, theta) -> ParameterView:
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} coordinates, got {theta.shape[-1]}")
        if not np.all(np.isfinite(theta)):
            raise NonFinite("theta has non-finite entries")
        prec = self._precisions(theta[..., self.prec_start:])
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            view = ParameterView(
                beta0=theta[..., 0],
                home=theta[..., 1],
                att=self._abilities(theta[..., self.att_start:self.def_start], prec[..., 0, :]),
                def_=self._abilities(theta[..., self.def_start:self.prec_start], prec[..., 1, :]),
            )
        if not (np.all(np.isfinite(view.att)) and np.all(np.isfinite(view.def_))):
            raise NonFinite("abilities overflow")
        for k, name in enumerate(self.extras):
            u = theta[..., 2 + k]
            if name == "eta0":
                view.eta0 = u
            elif name == "omega":
                view.omega = _sigmoid(u)
            else:
                setattr(view, name, np.exp(u))
        self._set_precisions(view, np.exp(theta[..., self.prec_start:]))
        return view

    def _set_precisions(self, view, prec):
        dyn = self.spec.dynamics
        if dyn is Dynamics.OWEN:
            view.sigma = prec[..., 0]
        elif dyn is Dynamics.EGIDI:
            view.sigma_att, view.sigma_def = prec[..., 0], prec[..., 1]
        elif dyn is Dynamics.WEIGHTED:
            m = self.spec.n_periods - 1
            view.phi_att, view.phi_def = prec[..., :m], prec[..., m:]

    def unconstrain(self, view: ParameterView) -> np.ndarray:
        n, t = self.spec.n_teams, self.spec.n_periods
        beta0 = np.asarray(view.beta0, float)
        parts = [beta0[..., None], np.asarray(view.home, float)[..., None]]
        for name in self.extras:
            v = np.asarray(getattr(view, name), float)
            if name == "eta0":
                parts.append(v[..., None])
            elif name == "omega":
                parts.append(_logit(v)[..., None])
            else:
                parts.append(np.log(v)[..., None])
        dyn = self.spec.dynamics
        if dyn is Dynamics.OWEN:
            logp = [np.log(np.asarray(view.sigma, float))[..., None]]
        elif dyn is Dynamics.EGIDI:
            logp = [np.log(np.asarray(view.sigma_att, float))[..., None],
                    np.log(np.asarray(view.sigma_def, float))[..., None]]
        elif dyn is Dynamics.WEIGHTED:
            logp = [np.log(np.asarray(view.phi_att, float)), np.log(np.asarray(view.phi_def, float))]
        else:
            logp = [np.zeros((0,))]
        lead = np.broadcast_shapes(*(x.shape[:-1] for x in logp))
        u = np.concatenate([np.broadcast_to(x, lead + x.shape[-1:]) for x in logp], axis=-1)
        with np.errstate(invalid="ignore"):
            prec = self._precisions(u)
        parts.append(self._free_from_abilities(view.att, prec[..., 0, :]))
        parts.append(self._free_from_abilities(view.def_, prec[..., 1, :]))
        parts.append(u)
        shape = np.broadcast_shapes(*(p.shape[:-1] for p in parts))
        theta = np.concatenate([np.broadcast_to(p, shape + p.shape[-1:]) for p in parts], axis=-1)
        if not np.all(np.isfinite(theta)):
            raise NonFinite("view maps to non-finite coordinates")
        return theta

    def flatten(self, theta) -> np.ndarray:
        """Constrained values in :attr:`constrained_names` order."""
        v = self.constrain(theta)
        lead = np.shape(v.beta0)
        cols = [v.beta0[..., None], v.home[..., None]]
        cols += [np.asarray(getattr(v, e))[..., None] for e in self.extras]
        cols += [v.att.reshape(lead + (-1,)), v.def_.reshape(lead + (-1,))]
        cols.append(np.exp(np.asarray(theta, float)[..., self.prec_start:]))
        return np.concatenate(cols, axis=-1)

    def unflatten(self, flat) -> np.ndarray:
        """Inverse of :meth:`flatten`, back to ``theta``."""
        flat = np.asarray(flat, float)
        n, t = self.spec.n_teams, self.spec.n_periods
        k = 2 + len(self.extras)
        view = ParameterView(beta0=flat[..., 0], home=flat[..., 1],
                             att=flat[..., k:k + n * t].reshape(flat.shape[:-1] + (n, t)),
                             def_=flat[..., k + n * t:k + 2 * n * t].reshape(flat.shape[:-1] + (n, t)))
        for j, name in enumerate(self.extras):
            setattr(view, name, flat[..., 2 + j])
        self._set_precisions(view, flat[..., k + 2 * n * t:])
        return self.unconstrain(view)

    # -- prior --------------------------------------------------------------

    def precision_matrix(self, theta):
        """Per-period evolution precision of each ability type, shape (2, n_periods - 1)."""
        if self.spec.dynamics is Dynamics.STATIC:
            return np.zeros((2, self.spec.n_periods - 1))
        return np.array(self._precisions(np.asarray(theta, float)[self.prec_start:]))

    def free_ability_grad(self, g_full):
        """Chain a gradient over full (n_teams, n_periods) abilities to centred free coordinates."""
        g = g_full[:-1] - g_full[-1]
        return g.T.reshape(-1)

    def ability_grad(self, theta, g_att, g_def):
        """Chain gradients over full abilities to ``theta``.

        Returns a ``dim`` vector; non-zero on the ability blocks and, for the
        non-centred regimes, on the log-precisions.
        """
        theta = np.asarray(theta, float)
        grad = np.zeros(self.dim)
        if not self.noncentred:
            grad[self.att_start:self.def_start] = self.free_ability_grad(g_att)
            grad[self.def_start:self.prec_start] = self.free_ability_grad(g_def)
            return grad
        n, t = self.spec.n_teams, self.spec.n_periods
        prec = self.precision_matrix(theta)
        g_prec = np.zeros((2, t - 1))
        for b, (start, g) in enumerate(((self.att_start, g_att), (self.def_start, g_def))):
            free = self._free(theta[start:start + self.n_free])
            tail = np.cumsum(g[:, ::-1], axis=1)[:, ::-1]  # sum over later periods
            out = np.empty((t, n - 1))
            out[0] = tail[:-1, 0] - tail[-1, 0]
            scale = 1.0 / np.sqrt(prec[b])
            proj = self.basis.T @ tail[:, 1:]  # (n - 1, t - 1)
            out[1:] = (proj * scale).T
            g_prec[b] = -0.5 * scale * np.sum(proj.T * free[1:], axis=1)
            grad[start:start + self.n_free] = out.reshape(-1)
        grad[self.prec_start:] = self._collapse_precision_grad(g_prec)
        return grad

    def _collapse_precision_grad(self, g_prec):
        dyn = self.spec.dynamics
        if dyn is Dynamics.OWEN:
            return np.array([g_prec.sum()])
        if dyn is Dynamics.EGIDI:
            return g_prec.sum(axis=1)
        if dyn is Dynamics.WEIGHTED:
            return g_prec.reshape(-1)
        return np.zeros(0)

    def noncentring_log_jacobian(self, theta):
        """log |d centred free coords / d theta| of the ability blocks."""
        if not self.noncentred:
            return 0.0
        prec = self.precision_matrix(theta)
        n = self.spec.n_teams
        return float(np.sum(-0.5 * (n - 1) * np.log(prec) + self._log_det_basis))

    def log_prior_grad(self, theta):
        """Log prior density of ``theta`` (Jacobians included) and its gradient."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.dim,):
            raise ValueError(f"expected shape ({self.dim},), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise NonFinite("theta has non-finite entries")
        spec, hp = self.spec, self.spec.hyper
        grad = np.zeros(self.dim)
        lp = _log_normal(theta[0], hp.intercept_prior_sd) + _log_normal(theta[1], hp.home_prior_sd)
        grad[0] = -theta[0] / hp.intercept_prior_sd**2
        grad[1] = -theta[1] / hp.home_prior_sd**2
        for k, name in enumerate(self.extras):
            j = 2 + k
            u = theta[j]
            if name == "eta0":
                lp += _log_normal(u, hp.intercept_prior_sd)
                grad[j] = -u / hp.intercept_prior_sd**2
            elif name == "omega":
                # uniform on (0, 1); only the logit Jacobian remains
                lp += -np.logaddexp(0.0, u) - np.logaddexp(0.0, -u)
                grad[j] = 1.0 - 2.0 * _sigmoid(u)
            else:
                x = math.exp(u)
                lp += _log_half_cauchy(x, hp.cauchy_scale) + u
                grad[j] = 1.0 - 2.0 * x * x / (hp.cauchy_scale**2 + x * x)

        n, t = spec.n_teams, spec.n_periods
        sd0 = hp.init_ability_sd
        for b, start in enumerate((self.att_start, self.def_start)):
            free = theta[start:start + self.n_free]
            head = free if spec.dynamics is Dynamics.STATIC else free[: n - 1]
            lp += np.sum(_log_normal(head, sd0))
            grad[start:start + len(head)] += -head / sd0**2
            if not self.noncentred:
                continue
            # zero-sum random walk: the steps of all n teams are N(0, 1/p),
            # restricted to the (n - 1)-dimensional zero-sum subspace, with
            # density (n-1)/2 log p + log(n)/2 - p|step|^2/2 on free
            # coordinates.  In the non-centred z the p-dependence cancels.
            z = free[n - 1:]
            lp += (t - 1) * (0.5 * math.log(n) + self._log_det_basis
                             - 0.5 * (n - 1) * _LOG_2PI) - 0.5 * np.dot(z, z)
            grad[start + n - 1:start + self.n_free] += -z

        u = theta[self.prec_start:]
        if spec.dynamics in (Dynamics.OWEN, Dynamics.EGIDI):
            x = np.exp(u)
            lp += np.sum(_log_half_cauchy(x, hp.cauchy_scale) + u)
            grad[self.prec_start:] += 1.0 - 2.0 * x * x / (hp.cauchy_scale**2 + x * x)
        elif spec.dynamics is Dynamics.WEIGHTED:
            x = np.exp(u)
            dens, dphi = _spike_slab(x, hp)
            lp += np.sum(dens + u)
            grad[self.prec_start:] += dphi * x + 1.0
        return float(lp), grad


def build_space(spec: ModelSpec) -> ParameterSpace:
    return ParameterSpace(spec)


def log_prior(view: ParameterView, spec: ModelSpec) -> float:
    """Log prior of a constrained view.

    The density is taken over centred free abilities, with the log/logit
    Jacobians of the scalar parameters included.
    """
    space = ParameterSpace(spec)
    theta = space.unconstrain(view)
    return space.log_prior_grad(theta)[0] - space.noncentring_log_jacobian(theta)
