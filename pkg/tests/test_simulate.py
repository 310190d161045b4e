import json
from collections import Counter

import numpy as np
import pytest

from dynfoot.cli import main
from dynfoot.data import parse_matches, periodize
from dynfoot.simulate import double_round_robin, draw_scores, draw_truth, simulate_league, write_csv
from dynfoot.space import ModelSpec

from conftest import small_league


@pytest.mark.parametrize("n", [2, 4, 6, 18, 20])
def test_round_robin_schedule(n):
    rounds = double_round_robin(n)
    assert len(rounds) == 2 * (n - 1)
    pairs = Counter(p for rnd in rounds for p in rnd)
    assert len(pairs) == n * (n - 1) and set(pairs.values()) == {1}
    for rnd in rounds:
        teams = [t for p in rnd for t in p]
        assert sorted(teams) == list(range(n))  # everyone plays once per round


def test_odd_team_count_rejected():
    with pytest.raises(ValueError):
        double_round_robin(5)


def test_league_size_and_reproducibility():
    spec, truth, ds = small_league("dp", "owen", n_teams=18, n_periods=2, seed=7)
    assert len(ds) == 2 * 306
    assert np.bincount(ds.period_of_match)[1:].tolist() == [306, 306]
    again = small_league("dp", "owen", n_teams=18, n_periods=2, seed=7)[2]
    assert ds == again
    assert not ds == small_league("dp", "owen", n_teams=18, n_periods=2, seed=8)[2]


def test_truth_is_zero_sum(rng):
    for dyn in ("static", "owen", "egidi", "weighted"):
        t = draw_truth(ModelSpec("bp", dyn, 6, 4), rng)
        np.testing.assert_allclose(t.view.att.sum(axis=0), 0, atol=1e-12)
        np.testing.assert_allclose(t.view.def_.sum(axis=0), 0, atol=1e-12)
    same = draw_truth(ModelSpec("dp", "weighted", 6, 3), rng, step_sd=0.0)
    assert np.all(same.view.att == same.view.att[:, :1])
    assert np.all(same.view.phi_att == 1e6)


@pytest.mark.parametrize("family, extra", [("dp", 0.0), ("nb", 0.0), ("sm", 0.0), ("bp", np.exp(-1.5))])
def test_home_goal_mean(family, extra):
    """Monte Carlo mean of home goals matches the rate (lambda_1, plus lambda_3 for BP)."""
    spec = ModelSpec(family, "static", 4, 1)
    gen = np.random.default_rng(11)
    truth = draw_truth(spec, gen)
    lam1 = gen.uniform(0.5, 2.5, 12)
    lam2 = gen.uniform(0.5, 2.5, 12)
    x = np.array([draw_scores(family, lam1, lam2, truth.view, gen)[0] for _ in range(10_000)])
    assert abs(x.mean() / (lam1.mean() + extra) - 1) < 0.01


def test_zero_inflation_adds_ties():
    spec = ModelSpec("zism", "static", 4, 1)
    gen = np.random.default_rng(2)
    truth = draw_truth(spec, gen, omega=0.4)
    lam = np.full(20_000, 1.3)
    x, y = draw_scores("zism", lam, lam, truth.view, gen)
    p0 = np.mean(gen.poisson(1.3, 20_000) == gen.poisson(1.3, 20_000))
    assert np.mean(x == y) == pytest.approx(0.4 + 0.6 * p0, abs=0.02)


def test_csv_round_trip(tmp_path):
    _, _, ds = small_league("nb", "egidi", n_teams=6, n_periods=4, seed=3)
    path = tmp_path / "sim.csv"
    write_csv(ds, path)
    back = periodize(parse_matches(path))
    assert back == ds
    assert back.n_periods == 4


def test_simulate_command(tmp_path, capsys):
    out = tmp_path / "sim"
    assert main(["simulate", "--family", "bp", "--dynamics", "weighted", "--teams", "6",
                 "--periods", "2", "--seed", "5", "--out", str(out)]) == 0
    truth = json.loads((out / "truth.json").read_text())
    assert truth["family"] == "bp" and truth["n_teams"] == 6
    assert any(k.startswith("phi_att") for k in truth["parameters"])
    first = (out / "matches.csv").read_bytes()
    out2 = tmp_path / "sim2"
    main(["simulate", "--family", "bp", "--dynamics", "weighted", "--teams", "6",
          "--periods", "2", "--seed", "5", "--out", str(out2)])
    assert (out2 / "matches.csv").read_bytes() == first
    # re-simulate from the written truth
    out3 = tmp_path / "sim3"
    assert main(["simulate", "--truth", str(out / "truth.json"), "--seed", "9", "--out", str(out3)]) == 0
    assert len(parse_matches(out3 / "matches.csv")) == 2 * 30
    assert main(["simulate", "--teams", "5", "--out", str(tmp_path / "bad")]) != 0
