import io
import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dynfoot.data import (
    MatchRecord,
    TeamRegistry,
    assign_rounds,
    parse_matches,
    periodize,
    scenario_cutoff,
    split_for_scenario,
)
from dynfoot.errors import BadRow, EmptyHoldout, MissingColumn, OddTeamCount
from dynfoot.simulate import double_round_robin

HEADER = "Date,HomeTeam,AwayTeam,FTHG,FTAG\n"


def season(n_teams, year=2020, label=None, with_rounds=False):
    """Complete double round-robin, one round per week."""
    names = [f"Club{i:02d}" for i in range(n_teams)]
    out = []
    for r, rnd in enumerate(double_round_robin(n_teams)):
        for k, (h, a) in enumerate(rnd):
            out.append(MatchRecord(date(year, 8, 1) + timedelta(weeks=r, hours=k), names[h], names[a],
                                   (r + k) % 3, k % 2, label or str(year), r + 1 if with_rounds else None))
    return out


class TestParse:
    def test_row_mapping(self):
        [m] = parse_matches((HEADER + "16/05/2025,Bayern Munich,Gladbach,2,0\n").encode())
        assert (m.home_team, m.away_team, m.home_goals, m.away_goals) == ("Bayern Munich", "Gladbach", 2, 0)
        assert m.date == date(2025, 5, 16)

    def test_two_digit_year_and_iso(self):
        text = HEADER + "16/05/25,A,B,1,1\n2025-05-17,B,A,0,3\n"
        a, b = parse_matches(text.encode())
        assert a.date == date(2025, 5, 16) and b.date == date(2025, 5, 17)

    def test_missing_column(self):
        with pytest.raises(MissingColumn) as err:
            parse_matches(b"Date,HomeTeam,AwayTeam,FTAG\n01/01/2020,A,B,1\n")
        assert err.value.name == "FTHG"

    @pytest.mark.parametrize("row,reason", [("01/01/2020,A,B,,1", "FTHG"), ("01/01/2020,A,B,x,1", "FTHG"),
                                            ("01/01/2020,A,B,1,-1", "FTAG"), ("31/02/2020,A,B,1,1", "date"),
                                            ("01/01/2020,A,A,1,1", "itself")])
    def test_bad_row_numbered(self, row, reason):
        text = HEADER + "01/01/2020,A,B,1,0\n" + row + "\n"
        with pytest.raises(BadRow) as err:
            parse_matches(text.encode())
        assert err.value.line_no == 3
        assert reason in err.value.reason

    def test_extra_columns_bom_and_blank_lines(self):
        text = "﻿Div,Date,HomeTeam,AwayTeam,FTHG,FTAG,B365H\nD1,01/01/2020,A,B,1,0,1.5\n,,,,,,\n"
        assert len(parse_matches(text.encode())) == 1

    def test_sources(self, tmp_path):
        text = HEADER + "01/01/2020,A,B,1,0\n"
        path = tmp_path / "m.csv"
        path.write_text(text)
        stream = io.BytesIO(text.encode())
        got = [parse_matches(path), parse_matches(str(path)), parse_matches(stream), parse_matches(io.StringIO(text))]
        assert all(g == got[0] for g in got)
        assert not stream.closed

    def test_full_season_count(self):
        rows = "".join(f"{m.date:%d/%m/%Y},{m.home_team},{m.away_team},{m.home_goals},{m.away_goals}\n"
                       for m in season(18))
        assert len(parse_matches((HEADER + rows).encode(), season="2024-2025")) == 306

    def test_optional_columns(self):
        text = "Date,HomeTeam,AwayTeam,FTHG,FTAG,Season,Round\n01/01/2020,A,B,1,0,S9,4\n"
        [m] = parse_matches(text.encode(), season="ignored")
        assert (m.season, m.round) == ("S9", 4)


class TestRounds:
    def test_eighteen_teams(self):
        ms = assign_rounds(season(18))
        ordered = sorted(ms, key=lambda m: m.date)
        assert {m.round for m in ordered[:9]} == {1}
        assert ordered[9].round == 2

    def test_twenty_teams(self):
        assert max(m.round for m in assign_rounds(season(20))) == 38

    def test_explicit_rounds_win(self):
        ms = [m.__class__(**{**m.__dict__, "round": 1}) for m in season(4)]
        assert {m.round for m in assign_rounds(ms)} == {1}

    def test_odd_team_count(self):
        ms = [m for m in season(4) if "Club03" not in (m.home_team, m.away_team)]
        with pytest.raises(OddTeamCount):
            assign_rounds(ms)


class TestPeriodize:
    def test_half_season_boundary(self):
        ds = periodize(season(18))
        by_round = {m.round: p for m, p in zip(ds.matches, ds.period_of_match)}
        assert by_round[17] == 1 and by_round[18] == 2
        assert ds.n_periods == 2

    def test_thirty_eight_rounds(self):
        ds = periodize(season(20))
        assert {p for m, p in zip(ds.matches, ds.period_of_match) if m.round == 20} == {2}

    def test_five_seasons_ten_periods(self):
        ms = [m for y in range(2019, 2024) for m in season(20, year=y)]
        ds = periodize(ms)
        assert ds.n_periods == 10
        assert sorted(set(ds.period_of_match.tolist())) == list(range(1, 11))

    def test_registry_sorted_and_spans_all_seasons(self):
        promoted = [MatchRecord(m.date, m.home_team.replace("Club00", "Newcomer"),
                                m.away_team.replace("Club00", "Newcomer"), m.home_goals, m.away_goals, "2021")
                    for m in season(4, year=2021)]
        ds = periodize(season(4) + promoted)
        assert ds.registry.names == tuple(sorted(ds.registry.names))
        assert "Club00" in ds.registry and "Newcomer" in ds.registry

    @settings(max_examples=20, deadline=None)
    @given(st.randoms(use_true_random=False))
    def test_order_independent(self, rnd):
        ms = season(6) + season(6, year=2021)
        shuffled = list(ms)
        rnd.shuffle(shuffled)
        assert periodize(shuffled) == periodize(ms)

    def test_first_half_before_second(self):
        ds = periodize(season(8) + season(8, year=2021))
        for label in ("2020", "2021"):
            rows = [(m.round, p) for m, p in zip(ds.matches, ds.period_of_match) if m.season == label]
            r_max = max(r for r, _ in rows)
            first = {p for r, p in rows if r <= math.ceil(r_max / 2)}
            second = {p for r, p in rows if r > math.ceil(r_max / 2)}
            assert max(first) < min(second)

    def test_registry_validation(self):
        with pytest.raises(ValueError):
            TeamRegistry(("B", "A"))
        assert TeamRegistry(("A", "B")).index == {"A": 0, "B": 1}


class TestSplit:
    def test_cutoffs(self):
        assert scenario_cutoff("second-half", 34) == 17
        assert scenario_cutoff("last-three-rounds", 34) == 31
        assert scenario_cutoff("last-round", 38) == 37
        assert scenario_cutoff("cutoff=12", 38) == 12
        assert scenario_cutoff(5, 38) == 5

    def test_last_round_ten_matches(self):
        ds = periodize(season(20, year=2023) + season(20, year=2024))
        split = split_for_scenario(ds, "last-round")
        assert len(split.holdout) == 10
        assert all(m.season == "2024" for m in split.holdout.matches)

    def test_last_three_rounds(self):
        ds = periodize(season(18))
        assert len(split_for_scenario(ds, "last-three-rounds").holdout) == 27

    def test_empty_holdout(self):
        with pytest.raises(EmptyHoldout):
            split_for_scenario(periodize(season(20)), "cutoff=38")

    @pytest.mark.parametrize("scenario", ["second-half", "last-three-rounds", "last-round", "cutoff=5"])
    def test_partition(self, scenario):
        ds = periodize(season(8) + season(8, year=2021))
        split = split_for_scenario(ds, scenario)
        assert len(split.train) + len(split.holdout) == len(ds)
        assert set(split.train.matches).isdisjoint(split.holdout.matches)
        assert split.train.n_periods == ds.n_periods
        assert np.all(split.holdout.period_of_match <= split.train.n_periods)
