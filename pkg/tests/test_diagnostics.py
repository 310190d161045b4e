import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynfoot.diagnostics import ess_bulk, ess_tail, is_degenerate, split_rhat, summarize


def ar1(rng, rho, chains, n):
    x = np.empty((chains, n))
    x[:, 0] = rng.normal(size=chains)
    noise = rng.normal(0, np.sqrt(1 - rho * rho), (chains, n))
    for t in range(1, n):
        x[:, t] = rho * x[:, t - 1] + noise[:, t]
    return x


def test_constant_chains_guard():
    x = np.full((4, 100), 3.5)
    assert split_rhat(x) == 1.0
    assert ess_bulk(x) == ess_tail(x) == 400
    assert is_degenerate(x)
    diag = summarize(x[..., None])
    assert diag.degenerate[0] and diag.ess_bulk[0] == 400


def test_iid_draws(rng):
    x = rng.normal(size=(4, 1000))
    assert split_rhat(x) < 1.01
    assert 3200 <= ess_bulk(x) <= 4800
    assert 2400 <= ess_tail(x) <= 4000


def test_offset_chains(rng):
    x = rng.normal(size=(2, 1000))
    x[1] += 10
    assert split_rhat(x, rank=False) > 2
    # rank normalisation saturates for fully separated chains
    assert 1.5 < split_rhat(x) < 2


def test_ar1_ess_matches_analytic(rng):
    rho = 0.9
    x = ar1(rng, rho, 4, 5000)
    expected = x.size * (1 - rho) / (1 + rho)
    assert abs(ess_bulk(x) / expected - 1) < 0.3


def test_ess_upper_bound_antithetic():
    # negatively correlated draws would give ESS > n; the estimate is capped
    x = np.tile([1.0, -1.0], (4, 500)) + np.random.default_rng(1).normal(0, 0.01, (4, 1000))
    assert ess_bulk(x) <= x.size


def test_input_checks():
    with pytest.raises(ValueError):
        split_rhat(np.zeros(10))
    with pytest.raises(ValueError):
        ess_bulk(np.zeros((2, 3)))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-5, 5))
def test_bounds(seed, shift):
    x = np.random.default_rng(seed).normal(size=(3, 60))
    x[0] += shift
    # zero between-chain variance gives the floor sqrt((n - 1) / n), n = split length
    assert split_rhat(x) >= np.sqrt(29 / 30) - 1e-12
    for f in (ess_bulk, ess_tail):
        assert 0 < f(x) <= x.size


def test_summarize_shapes(rng):
    diag = summarize(rng.normal(size=(4, 200, 3)), names=["a", "b", "c"], divergences=2)
    assert [r[0] for r in diag.rows()] == ["a", "b", "c"]
    assert diag.divergences == 2 and diag.max_rhat < 1.05 and diag.min_ess_bulk > 400
