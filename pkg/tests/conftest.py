import numpy as np
import pytest

from dynfoot.data import MatchRecord, PeriodizedDataset, TeamRegistry
from dynfoot.simulate import draw_truth, simulate_league
from dynfoot.space import ModelSpec


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def small_league(family="dp", dynamics="owen", n_teams=4, n_periods=4, seed=0, **truth):
    """Simulated double round-robin league and its truth."""
    spec = ModelSpec(family, dynamics, n_teams, n_periods)
    gen = np.random.default_rng(seed)
    t = draw_truth(spec, gen, **truth)
    return spec, t, simulate_league(t, gen)


@pytest.fixture
def toy_csv(tmp_path):
    """Two teams, four matches, one season."""
    path = tmp_path / "toy.csv"
    path.write_text(
        "Date,HomeTeam,AwayTeam,FTHG,FTAG\n"
        "01/08/2020,Alpha,Beta,2,1\n"
        "08/08/2020,Beta,Alpha,0,0\n"
        "15/08/2020,Alpha,Beta,1,1\n"
        "22/08/2020,Beta,Alpha,1,2\n",
        encoding="utf-8",
    )
    return path


def one_match_dataset(x, y, n_teams=2, n_periods=1):
    names = tuple(f"T{i}" for i in range(n_teams))
    from datetime import date

    m = MatchRecord(date(2020, 1, 1), names[0], names[1], x, y, "S1", 1)
    return PeriodizedDataset((m,), TeamRegistry(names), np.array([1]), n_periods)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":").rstrip("abc"))):
            terminalreporter.write_line(line)
