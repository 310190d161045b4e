"""Match ingestion, round inference, half-season periods and forecast splits.

Input files follow the football-data.co.uk layout: a header row with at least
``Date,HomeTeam,AwayTeam,FTHG,FTAG``.  Optional ``Season`` and ``Round``
columns override the per-file season label and the date-based round
inference respectively.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import BadRow, EmptyHoldout, MissingColumn, OddTeamCount

REQUIRED_COLUMNS = ("Date", "HomeTeam", "AwayTeam", "FTHG", "FTAG")
SCENARIOS = ("second-half", "last-three-rounds", "last-round")


@dataclass(frozen=True)
class MatchRecord:
    date: date
    home_team: str
    away_team: str
    home_goals: int
    away_goals: int
    season: str = ""
    round: int | None = None

    def __post_init__(self):
        if self.home_goals < 0 or self.away_goals < 0:
            raise ValueError("goal counts must be non-negative")
        if self.home_team == self.away_team:
            raise ValueError(f"team {self.home_team!r} cannot play itself")
        if self.round is not None and self.round < 1:
            raise ValueError("rounds are 1-based")

    @property
    def outcome(self) -> int:
        """0 for a home win, 1 for a draw, 2 for an away win."""
        if self.home_goals > self.away_goals:
            return 0
        if self.home_goals == self.away_goals:
            return 1
        return 2

    @property
    def match_id(self) -> str:
        return f"{self.date.isoformat()}:{self.home_team}:{self.away_team}"


def _sort_key(m: MatchRecord):
    return (m.date, m.home_team, m.away_team, m.home_goals, m.away_goals)


@dataclass(frozen=True)
class TeamRegistry:
    names: tuple[str, ...]

    def __post_init__(self):
        if list(self.names) != sorted(set(self.names)):
            raise ValueError("team names must be unique and sorted")

    @classmethod
    def from_matches(cls, matches: Iterable[MatchRecord]) -> "TeamRegistry":
        teams = set()
        for m in matches:
            teams.add(m.home_team)
            teams.add(m.away_team)
        return cls(tuple(sorted(teams)))

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.names)}

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self.index


@dataclass(frozen=True)
class PeriodizedDataset:
    """Matches with team indices and 1-based period labels.

    ``matches`` is kept in canonical (date, home, away) order so that the
    dataset does not depend on the row order of the source files.
    """

    matches: tuple[MatchRecord, ...]
    registry: TeamRegistry
    period_of_match: np.ndarray
    n_periods: int

    def __post_init__(self):
        periods = np.asarray(self.period_of_match, dtype=np.int64)
        if periods.shape != (len(self.matches),):
            raise ValueError("one period label per match required")
        if len(periods) and (periods.min() < 1 or periods.max() > self.n_periods):
            raise ValueError("period labels out of range")
        periods.setflags(write=False)
        object.__setattr__(self, "period_of_match", periods)

    def __len__(self):
        return len(self.matches)

    def __eq__(self, other):
        if not isinstance(other, PeriodizedDataset):
            return NotImplemented
        return (
            self.matches == other.matches
            and self.registry == other.registry
            and self.n_periods == other.n_periods
            and np.array_equal(self.period_of_match, other.period_of_match)
        )

    __hash__ = None

    @cached_property
    def home_idx(self) -> np.ndarray:
        idx = self.registry.index
        return np.array([idx[m.home_team] for m in self.matches], dtype=np.int64)

    @cached_property
    def away_idx(self) -> np.ndarray:
        idx = self.registry.index
        return np.array([idx[m.away_team] for m in self.matches], dtype=np.int64)

    @cached_property
    def home_goals(self) -> np.ndarray:
        return np.array([m.home_goals for m in self.matches], dtype=np.int64)

    @cached_property
    def away_goals(self) -> np.ndarray:
        return np.array([m.away_goals for m in self.matches], dtype=np.int64)

    @property
    def period_idx(self) -> np.ndarray:
        """0-based period of each match."""
        return self.period_of_match - 1

    def subset(self, mask) -> "PeriodizedDataset":
        mask = np.asarray(mask, dtype=bool)
        return PeriodizedDataset(
            matches=tuple(m for m, keep in zip(self.matches, mask) if keep),
            registry=self.registry,
            period_of_match=self.period_of_match[mask],
            n_periods=self.n_periods,
        )


@dataclass(frozen=True)
class FitSplit:
    train: PeriodizedDataset
    holdout: PeriodizedDataset
    scenario: str
    cutoff: int = field(default=0)


def _parse_date(text: str) -> date:
    text = text.strip()
    for fmt in ("%d/%m/%Y", "%d/%m/%y", "%Y-%m-%d"):
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            pass
    raise ValueError(f"unparseable date {text!r}")


def _parse_count(text: str, column: str) -> int:
    text = (text or "").strip()
    if not text:
        raise ValueError(f"missing {column}")
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"unparseable {column} {text!r}") from None
    if not value.is_integer() or value < 0:
        raise ValueError(f"{column} must be a non-negative integer, got {text!r}")
    return int(value)


def _text_stream(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8-sig")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8-sig"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8-sig", newline="")


def parse_matches(source, season: str = "", dialect: str | type = "excel") -> list[MatchRecord]:
    """Read match results from a football-data.co.uk style CSV.

    Parameters
    ----------
    source : path, bytes or file object
        Binary streams are decoded as UTF-8 (a BOM is tolerated).
    season : str
        Season label applied to every row unless the file has its own
        ``Season`` column.
    dialect : csv dialect name or class

    Raises
    ------
    MissingColumn
        A required header is absent.
    BadRow
        A data row has a missing or unparseable field; ``line_no`` counts the
        header as line 1.
    """
    stream = _text_stream(source)
    try:
        reader = csv.DictReader(stream, dialect=dialect)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for name in REQUIRED_COLUMNS:
            if name not in header:
                raise MissingColumn(name)
        reader.fieldnames = header
        has_round = "Round" in header
        has_season = "Season" in header
        out = []
        for line_no, row in enumerate(reader, start=2):
            if not any((v or "").strip() for v in row.values() if isinstance(v, str)):
                continue
            try:
                rnd = None
                if has_round and (row.get("Round") or "").strip():
                    rnd = _parse_count(row["Round"], "Round")
                label = season
                if has_season and (row.get("Season") or "").strip():
                    label = row["Season"].strip()
                out.append(
                    MatchRecord(
                        date=_parse_date(row["Date"] or ""),
                        home_team=(row["HomeTeam"] or "").strip(),
                        away_team=(row["AwayTeam"] or "").strip(),
                        home_goals=_parse_count(row["FTHG"], "FTHG"),
                        away_goals=_parse_count(row["FTAG"], "FTAG"),
                        season=label,
                        round=rnd,
                    )
                )
            except ValueError as exc:
                raise BadRow(line_no, str(exc)) from None
            if not out[-1].home_team or not out[-1].away_team:
                raise BadRow(line_no, "empty team name")
        return out
    finally:
        if isinstance(stream, io.TextIOWrapper) and not isinstance(source, (str, os.PathLike, io.TextIOBase)):
            stream.detach()
        elif stream is not source:
            stream.close()


def _by_season(matches: Iterable[MatchRecord]) -> dict[str, list[MatchRecord]]:
    seasons: dict[str, list[MatchRecord]] = {}
    for m in matches:
        seasons.setdefault(m.season, []).append(m)
    # chronological order of seasons, by their first fixture
    ordered = sorted(seasons.items(), key=lambda kv: (min(m.date for m in kv[1]), kv[0]))
    return {k: sorted(v, key=_sort_key) for k, v in ordered}


def assign_rounds(matches: Sequence[MatchRecord]) -> list[MatchRecord]:
    """Infer 1-based rounds per season from the chronological match order.

    With ``N`` teams in a season, its ``k``-th fixture (0-based, sorted by
    date) is placed in round ``1 + k // (N / 2)``.  Seasons where every match
    already carries a round are left untouched.
    """
    out = []
    for label, season_matches in _by_season(matches).items():
        if all(m.round is not None for m in season_matches):
            out.extend(season_matches)
            continue
        n_teams = len(TeamRegistry.from_matches(season_matches))
        if n_teams % 2:
            raise OddTeamCount(f"season {label!r} has an odd number of teams ({n_teams})")
        per_round = n_teams // 2
        out.extend(replace(m, round=1 + k // per_round) for k, m in enumerate(season_matches))
    return out


def periodize(matches: Sequence[MatchRecord], scheme: str = "half-season", registry=None) -> PeriodizedDataset:
    """Split each season into two periods at round ``ceil(R / 2)``.

    Periods are numbered chronologically across seasons.  The registry spans
    every team seen in any season unless one is passed in.
    """
    if scheme != "half-season":
        raise ValueError(f"unknown period scheme {scheme!r}")
    if any(m.round is None for m in matches):
        matches = assign_rounds(matches)
    registry = registry or TeamRegistry.from_matches(matches)
    ordered, periods = [], []
    next_period = 1
    for season_matches in _by_season(matches).values():
        n_rounds = max(m.round for m in season_matches)
        boundary = math.ceil(n_rounds / 2)
        second = [m.round > boundary for m in season_matches]
        for m, late in zip(season_matches, second):
            ordered.append(m)
            periods.append(next_period + int(late))
        next_period += 1 + int(any(second))
    if ordered:
        order = sorted(range(len(ordered)), key=lambda i: (periods[i],) + _sort_key(ordered[i]))
        ordered = [ordered[i] for i in order]
        periods = [periods[i] for i in order]
    return PeriodizedDataset(
        matches=tuple(ordered),
        registry=registry,
        period_of_match=np.array(periods, dtype=np.int64),
        n_periods=next_period - 1,
    )


def scenario_cutoff(scenario: str | int, n_rounds: int) -> int:
    if isinstance(scenario, int):
        return scenario
    if scenario == "second-half":
        return math.ceil(n_rounds / 2)
    if scenario == "last-three-rounds":
        return n_rounds - 3
    if scenario == "last-round":
        return n_rounds - 1
    if scenario.startswith("cutoff="):
        return int(scenario.split("=", 1)[1])
    raise ValueError(f"unknown scenario {scenario!r}")


def split_for_scenario(dataset: PeriodizedDataset, scenario: str | int) -> FitSplit:
    """Hold out the most recent season's matches after a round cutoff.

    ``scenario`` is one of ``second-half``, ``last-three-rounds``,
    ``last-round``, ``cutoff=N`` or a bare integer cutoff.  The train part
    keeps the full registry and period count so that holdout periods with no
    training data still have parameters.
    """
    if not len(dataset):
        raise EmptyHoldout("dataset is empty")
    last_period = int(dataset.period_of_match.max())
    # the most recent season is the one containing the latest period
    latest_season = next(m.season for m, p in zip(dataset.matches, dataset.period_of_match) if p == last_period)
    in_season = np.array([m.season == latest_season for m in dataset.matches])
    n_rounds = max(m.round for m, s in zip(dataset.matches, in_season) if s)
    cutoff = scenario_cutoff(scenario, n_rounds)
    if cutoff >= n_rounds:
        raise EmptyHoldout(f"cutoff {cutoff} leaves no matches after round {n_rounds}")
    held = in_season & np.array([m.round > cutoff for m in dataset.matches])
    label = scenario if isinstance(scenario, str) else f"cutoff={scenario}"
    return FitSplit(dataset.subset(~held), dataset.subset(held), label, cutoff)
