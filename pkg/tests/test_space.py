import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from dynfoot.errors import ConfigError, NonFinite
from dynfoot.likelihoods import Family
from dynfoot.space import (
    Dynamics,
    HyperParams,
    ModelSpec,
    ParameterSpace,
    ParameterView,
    build_space,
    log_prior,
    log_spike_slab,
)

COMBOS = [(f, d) for f in Family for d in Dynamics]


def random_view(space, rng):
    spec = space.spec
    n, t = spec.n_teams, spec.n_periods
    att = rng.normal(0, 0.5, (n, t))
    dfn = rng.normal(0, 0.5, (n, t))
    v = ParameterView(beta0=rng.normal(), home=rng.normal(), att=att - att.mean(0), def_=dfn - dfn.mean(0))
    for name in spec.family.extras:
        setattr(v, name, rng.uniform(0.05, 0.95) if name == "omega" else
                (rng.normal() if name == "eta0" else rng.gamma(2.0, 1.0)))
    if spec.dynamics is Dynamics.OWEN:
        v.sigma = rng.gamma(2.0, 2.0)
    elif spec.dynamics is Dynamics.EGIDI:
        v.sigma_att, v.sigma_def = rng.gamma(2.0, 2.0, 2)
    elif spec.dynamics is Dynamics.WEIGHTED:
        v.phi_att, v.phi_def = rng.gamma(2.0, 2.0, (2, t - 1))
    return v


class TestSpec:
    def test_validation(self):
        with pytest.raises(ConfigError):
            ModelSpec("dp", "static", 1, 1)
        with pytest.raises(ConfigError):
            ModelSpec("dp", "weighted", 4, 1)
        with pytest.raises(ConfigError):
            ModelSpec("xx", "static", 4, 1)
        with pytest.raises(ConfigError):
            HyperParams(sd_spike=6.0)
        with pytest.raises(ConfigError):
            HyperParams(p_slab=1.2)

    @pytest.mark.parametrize("family,dynamics,n,t,dim", [
        ("dp", "static", 18, 1, 36), ("bp", "weighted", 20, 10, 401), ("nb", "owen", 18, 10, 344),
        ("dibp", "egidi", 6, 3, 5 + 2 * 5 * 3 + 2), ("zism", "static", 4, 2, 3 + 2 * 3 * 2)])
    def test_layout_dimension(self, family, dynamics, n, t, dim):
        space = build_space(ModelSpec(family, dynamics, n, t))
        assert space.dim == dim == len(space.unconstrained_names)


class TestTransforms:
    @pytest.mark.parametrize("family,dynamics", COMBOS)
    def test_round_trip(self, family, dynamics, rng):
        space = ParameterSpace(ModelSpec(family, dynamics, 5, 3))
        for _ in range(100 // len(COMBOS) + 1):
            v = random_view(space, rng)
            w = space.constrain(space.unconstrain(v))
            for name in ("beta0", "home", "att", "def_", *space.spec.family.extras):
                np.testing.assert_allclose(getattr(w, name), getattr(v, name), rtol=1e-12, atol=1e-12)
            theta = rng.normal(size=space.dim)
            np.testing.assert_allclose(space.unconstrain(space.constrain(theta)), theta, atol=1e-12)
            np.testing.assert_allclose(space.unflatten(space.flatten(theta)), theta, atol=1e-12)

    @pytest.mark.parametrize("dynamics", list(Dynamics))
    def test_zero_vector(self, dynamics):
        space = ParameterSpace(ModelSpec("dibp", dynamics, 6, 3))
        v = space.constrain(np.zeros(space.dim))
        assert np.all(v.att == 0) and np.all(v.def_ == 0)
        assert v.omega == 0.5 and v.gamma is None and v.xi == 1.0
        for name in ("sigma", "sigma_att", "sigma_def", "phi_att", "phi_def"):
            if getattr(v, name) is not None:
                assert np.all(getattr(v, name) == 1.0)

    def test_implied_last_team(self, rng):
        space = ParameterSpace(ModelSpec("dp", "static", 18, 1))
        theta = rng.normal(size=space.dim)
        v = space.constrain(theta)
        free = theta[space.att_start:space.att_start + 17]
        np.testing.assert_array_equal(v.att[:17, 0], free)
        assert v.att[17, 0] == -free.sum()

    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from(COMBOS), st.integers(2, 9), st.integers(2, 5), st.integers(0, 2**32 - 1))
    def test_zero_sum(self, combo, n, t, seed):
        space = ParameterSpace(ModelSpec(*combo, n, t))
        theta = np.random.default_rng(seed).normal(0, 2, (3, space.dim))
        v = space.constrain(theta)
        assert np.max(np.abs(v.att.sum(axis=-2))) < 1e-10
        assert np.max(np.abs(v.def_.sum(axis=-2))) < 1e-10

    def test_batch_matches_single(self, rng):
        space = ParameterSpace(ModelSpec("bp", "weighted", 5, 3))
        theta = rng.normal(size=(4, space.dim))
        batch = space.constrain(theta)
        for k in range(4):
            np.testing.assert_allclose(batch.att[k], space.constrain(theta[k]).att, atol=1e-14)

    def test_non_finite(self):
        space = ParameterSpace(ModelSpec("dp", "owen", 4, 2))
        theta = np.zeros(space.dim)
        theta[3] = np.nan
        with pytest.raises(NonFinite):
            space.constrain(theta)
        with pytest.raises(NonFinite):
            space.log_prior_grad(theta)

    def test_names(self):
        space = ParameterSpace(ModelSpec("bp", "weighted", 3, 2))
        assert space.constrained_names[:3] == ["beta0", "home", "eta0"]
        assert space.constrained_names[3:5] == ["att[1,1]", "att[1,2]"]
        assert space.constrained_names[-2:] == ["phi_att[2]", "phi_def[2]"]
        assert len(space.constrained_names) == space.flatten(np.zeros(space.dim)).shape[-1]


def _free_normal(v, sd):
    return stats.norm.logpdf(v[:-1, 0], 0, sd).sum()


def _walk(block, p):
    """Zero-sum Gaussian random walk density on free coordinates."""
    n = block.shape[0]
    steps = np.diff(block, axis=1)
    p = np.broadcast_to(p, (steps.shape[1],))
    return float(np.sum(0.5 * (n - 1) * np.log(p / (2 * math.pi)) + 0.5 * math.log(n)
                        - 0.5 * p * np.sum(steps**2, axis=0)))


def _half_cauchy(x, scale=5.0):
    return stats.halfcauchy.logpdf(x, 0, scale) + math.log(x)


class TestPrior:
    def test_owen_oracle(self, rng):
        spec = ModelSpec("dp", "owen", 5, 3)
        v = random_view(ParameterSpace(spec), rng)
        want = (stats.norm.logpdf(v.beta0, 0, 5) + stats.norm.logpdf(v.home, 0, 5)
                + _free_normal(v.att, 2) + _free_normal(v.def_, 2)
                + _walk(v.att, v.sigma) + _walk(v.def_, v.sigma) + _half_cauchy(v.sigma))
        assert log_prior(v, spec) == pytest.approx(want, rel=1e-12)

    def test_owen_constant_abilities(self):
        spec = ModelSpec("dp", "owen", 4, 3)
        att = np.repeat(np.array([[0.3], [-0.1], [0.0], [-0.2]]), 3, axis=1)
        v = ParameterView(beta0=0.0, home=0.0, att=att, def_=np.zeros((4, 3)), sigma=1.0)
        rest = (2 * stats.norm.logpdf(0, 0, 5) + stats.norm.logpdf(att[:3, 0], 0, 2).sum()
                + 3 * stats.norm.logpdf(0, 0, 2) + _half_cauchy(1.0))
        # zero innovations: each period-step adds (n-1) log N(0|0,1) plus log(n)/2
        walk = 2 * 2 * (3 * stats.norm.logpdf(0.0) + 0.5 * math.log(4))
        assert log_prior(v, spec) == pytest.approx(rest + walk, rel=1e-12)

    def test_static_oracle(self, rng):
        spec = ModelSpec("nb", "static", 4, 2)
        v = random_view(ParameterSpace(spec), rng)
        want = (stats.norm.logpdf([v.beta0, v.home], 0, 5).sum()
                + stats.norm.logpdf(v.att[:-1], 0, 2).sum() + stats.norm.logpdf(v.def_[:-1], 0, 2).sum()
                + _half_cauchy(v.gamma))
        assert log_prior(v, spec) == pytest.approx(want, rel=1e-12)

    def test_family_extras_oracle(self, rng):
        spec = ModelSpec("dibp", "static", 3, 1)
        v = random_view(ParameterSpace(spec), rng)
        base = ParameterView(beta0=v.beta0, home=v.home, att=v.att, def_=v.def_)
        extras = (stats.norm.logpdf(v.eta0, 0, 5) + math.log(v.omega * (1 - v.omega))
                  + _half_cauchy(v.xi))
        without = log_prior(base, ModelSpec("dp", "static", 3, 1))
        assert log_prior(v, spec) - without == pytest.approx(extras, rel=1e-12)

    def test_weighted_two_periods_has_two_spike_slab_terms(self, rng):
        spec = ModelSpec("dp", "weighted", 4, 2)
        v = random_view(ParameterSpace(spec), rng)
        walk = _walk(v.att, v.phi_att) + _walk(v.def_, v.phi_def)
        rest = (stats.norm.logpdf([v.beta0, v.home], 0, 5).sum() + _free_normal(v.att, 2) + _free_normal(v.def_, 2))
        terms = log_spike_slab(v.phi_att[0]) + log_spike_slab(v.phi_def[0]) + np.log(v.phi_att[0] * v.phi_def[0])
        assert log_prior(v, spec) == pytest.approx(rest + walk + terms, rel=1e-12)

    def test_regime_nesting(self, rng):
        c = 3.7
        w_spec, o_spec = ModelSpec("dp", "weighted", 5, 4), ModelSpec("dp", "owen", 5, 4)
        v = random_view(ParameterSpace(w_spec), rng)
        v.phi_att = v.phi_def = np.full(3, c)
        w = log_prior(v, w_spec) - 6 * (log_spike_slab(c) + math.log(c))
        v.sigma = c
        o = log_prior(v, o_spec) - _half_cauchy(c)
        assert w == pytest.approx(o, rel=1e-12)

    @pytest.mark.parametrize("family,dynamics", COMBOS)
    def test_gradient(self, family, dynamics, rng):
        space = ParameterSpace(ModelSpec(family, dynamics, 4, 3))
        h = 1e-6
        for _ in range(20):
            theta = rng.normal(0, 1, space.dim)
            _, grad = space.log_prior_grad(theta)
            fd = np.array([(space.log_prior_grad(theta + h * e)[0] - space.log_prior_grad(theta - h * e)[0]) / (2 * h)
                           for e in np.eye(space.dim)])
            assert np.max(np.abs(fd - grad) / np.maximum(1.0, np.abs(grad))) < 1e-6

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(COMBOS), st.integers(0, 2**32 - 1))
    def test_finite_everywhere(self, combo, seed):
        space = ParameterSpace(ModelSpec(*combo, 4, 3))
        lp, grad = space.log_prior_grad(np.random.default_rng(seed).normal(0, 4, space.dim))
        assert np.isfinite(lp) and np.all(np.isfinite(grad))


class TestSpikeSlab:
    def test_integrates_to_one(self):
        f = lambda x: math.exp(log_spike_slab(x))  # noqa: E731
        total = (integrate.quad(f, 0, 60, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
                 + integrate.quad(f, 60, 99, epsabs=1e-14, limit=200)[0]
                 + integrate.quad(f, 99, 101, epsabs=1e-14, epsrel=1e-13, points=[100], limit=200)[0]
                 + integrate.quad(f, 101, np.inf, epsabs=1e-14, limit=200)[0])
        assert abs(total - 1) < 1e-8

    def test_spike_dominates_at_100(self):
        hp = HyperParams()
        want = math.log(0.01) + stats.norm.logpdf(100, 100, 0.1) - stats.norm.logsf(0, 100, 0.1)
        assert log_spike_slab(100.0, hp) == pytest.approx(want, rel=1e-12)

    def test_pure_slab_is_half_normal(self):
        hp = HyperParams(p_slab=1.0)
        x = np.array([0.1, 1.0, 7.5])
        np.testing.assert_allclose(log_spike_slab(x, hp), math.log(2) + stats.norm.logpdf(x, 0, 5), rtol=1e-12)

    def test_non_positive_excluded(self):
        assert log_spike_slab(-1.0) == -np.inf
