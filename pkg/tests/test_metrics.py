import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynfoot.errors import EmptyInput
from dynfoot.metrics import OutcomeProbs, acp, brier, evaluate, pseudo_r2, rps

HOME, DRAW, AWAY = 0, 1, 2
U = (1 / 3, 1 / 3, 1 / 3)


def op(p, o):
    return OutcomeProbs(tuple(p), o)


@pytest.mark.parametrize("fn, items, expected", [
    (brier, [op((1, 0, 0), HOME)], 0.0),
    (brier, [op(U, HOME)], 2 / 3),
    (brier, [op(U, AWAY)], 2 / 3),
    (brier, [op((0, 1, 0), HOME)], 2.0),
    (acp, [op((1, 0, 0), HOME), op((0, 0, 1), AWAY)], 1.0),
    (acp, [op((0.2, 0.5, 0.3), HOME), op((0.1, 0.6, 0.3), DRAW)], 0.4),
    (acp, [op(U, DRAW)], 1 / 3),
    (rps, [op((1, 0, 0), HOME)], 0.0),
    (rps, [op(U, HOME)], 5 / 18),
    (rps, [op((0, 1, 0), HOME)], 0.5),
    (rps, [op((0, 0, 1), HOME)], 1.0),
    (pseudo_r2, [op((0, 1, 0), DRAW)], 1.0),
    (pseudo_r2, [op((0.25, 0.5, 0.25), HOME), op((1, 0, 0), HOME)], 0.5),
    (pseudo_r2, [op((0, 0.5, 0.5), HOME), op(U, DRAW)], 0.0),
])
def test_hand_examples(fn, items, expected):
    assert abs(fn(items) - expected) <= 1e-12


def test_evaluate_bundle():
    rep = evaluate([op((1, 0, 0), HOME), op((0, 0, 1), AWAY)])
    assert rep.to_dict() == {"brier": 0.0, "acp": 1.0, "rps": 0.0, "pseudo_r2": 1.0, "n_matches": 2}


def test_validation():
    with pytest.raises(EmptyInput):
        brier([])
    with pytest.raises(ValueError):
        op((0.5, 0.5, 0.5), HOME)
    with pytest.raises(ValueError):
        op((1, 0, 0), 3)


simplex = st.lists(st.floats(0.001, 1), min_size=3, max_size=3).map(lambda v: tuple(np.array(v) / sum(v)))
items = st.lists(st.tuples(simplex, st.integers(0, 2)), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(items=items, seed=st.integers(0, 1000))
def test_properties(items, seed):
    xs = [op(p, o) for p, o in items]
    rep = evaluate(xs)
    assert 0 <= rep.brier <= 2 and 0 <= rep.rps <= 1
    assert 0 <= rep.pseudo_r2 <= rep.acp + 1e-12 <= 1 + 1e-12  # AM-GM
    perm = np.random.default_rng(seed).permutation(len(xs))
    again = evaluate([xs[k] for k in perm])
    for a, b in zip(rep.to_dict().values(), again.to_dict().values()):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_am_gm_equality():
    xs = [op((0.3, 0.4, 0.3), HOME), op((0.3, 0.3, 0.4), DRAW), op((0.1, 0.6, 0.3), AWAY)]
    assert pseudo_r2(xs) == pytest.approx(acp(xs), abs=1e-12)


def test_zero_only_for_point_masses():
    for p in itertools.product([0, 1], repeat=3):
        if sum(p) == 1:
            o = p.index(1)
            assert brier([op(p, o)]) == 0 and rps([op(p, o)]) == 0
    assert brier([op((0.98, 0.01, 0.01), HOME)]) > 0


def test_pseudo_r2_log_space():
    tiny = 1e-300
    xs = [op((tiny, 1 - tiny, 0), HOME)] * 1000
    assert pseudo_r2(xs) == pytest.approx(tiny, rel=1e-9)
