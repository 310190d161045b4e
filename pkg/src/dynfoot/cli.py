"""Command line front end: ``dynfoot {fit,forecast,evaluate,compare,simulate}``.

Settings come from flags, then an optional flat ``key = value`` file given by
``--config``, then defaults.  ``fit`` writes into ``--out``:

    draws.csv        chain, iteration and every constrained parameter
    diagnostics.csv  R-hat, bulk/tail ESS per constrained parameter
    abilities.csv    posterior ability summaries per team and period
    manifest.json    config echo and hash, checksums, timings, diagnostics

Exit codes: 0 success, 2 configuration error, 3 data error, 4 sampler failure.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import PeriodizedDataset, parse_matches, periodize, split_for_scenario
from .diagnostics import summarize
from .errors import ArtifactMismatch, ConfigError, DynfootError, SchemaMismatch, UnmatchedFixture
from .likelihoods import Family
from .metrics import OutcomeProbs, evaluate
from .posterior import fit as fit_posterior
from .predict import Fixture, forecast, summarize_abilities
from .sampler import SamplerConfig
from .space import Dynamics, HyperParams, ModelSpec, ParameterSpace

log = logging.getLogger("dynfoot")

SCENARIO_ALIASES = {"last3": "last-three-rounds", "last1": "last-round"}
METRICS = ("brier", "acp", "rps", "pseudo_r2")
LOWER_IS_BETTER = {"brier": True, "rps": True, "acp": False, "pseudo_r2": False}
REPORT_KEYS = ("league", "family", "dynamics", *METRICS, "n_matches")


@dataclass
class RunConfig:
    data: list[tuple[str, str]] = field(default_factory=list)
    league: str = "league"
    family: str = "dp"
    dynamics: str = "static"
    scenario: str = "second-half"
    chains: int = 4
    warmup: int = 1000
    samples: int = 1000
    seed: int = 0
    target_accept: float = 0.8
    max_tree_depth: int = 10
    jobs: int = 1
    hyper: dict = field(default_factory=dict)
    out: str = "run"

    def validate(self):
        try:
            Family(self.family)
            Dynamics(self.dynamics)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not self.data:
            raise ConfigError("no data files given (--data path[:season])")
        self.scenario = SCENARIO_ALIASES.get(self.scenario, self.scenario)
        if self.scenario not in ("second-half", "last-three-rounds", "last-round"):
            head, _, value = self.scenario.partition("=")
            if head != "cutoff" or not value.isdigit():
                raise ConfigError(f"unknown scenario {self.scenario!r}")
        for name in ("chains", "warmup", "samples", "max_tree_depth", "jobs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if not 0 < self.target_accept < 1:
            raise ConfigError("target_accept must lie in (0, 1)")
        unknown = set(self.hyper) - set(HyperParams.field_names())
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {sorted(unknown)}")
        self.hyper_params()
        return self

    def hyper_params(self) -> HyperParams:
        return HyperParams(**self.hyper)

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(n_chains=self.chains, n_warmup=self.warmup, n_samples=self.samples,
                             target_accept=self.target_accept, max_tree_depth=self.max_tree_depth,
                             seed=self.seed, n_jobs=self.jobs)

    def echo(self) -> dict:
        """Settings that determine the output; ``out`` and ``jobs`` are excluded."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("jobs")
        d["data"] = [[p, s] for p, s in self.data]
        return d

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.echo(), sort_keys=True).encode()).hexdigest()


# -- config assembly ---------------------------------------------------------

_INT_KEYS = {"chains", "warmup", "samples", "seed", "max_tree_depth", "jobs"}
_FLOAT_KEYS = {"target_accept"}


def parse_data_spec(text: str) -> tuple[str, str]:
    """``path[:season]``; a drive-letter colon is not taken as a separator."""
    path, sep, season = text.rpartition(":")
    if not sep or not path or "/" in season or "\\" in season:
        return text, ""
    return path, season


def read_config_file(path) -> dict:
    values = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(key, value):
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return value


def build_config(args, base: dict | None = None) -> RunConfig:
    """Merge defaults, ``base`` (a stored config echo), the config file and flags (flags win)."""
    cfg = RunConfig()
    for key, value in (base or {}).items():
        setattr(cfg, key, [tuple(d) for d in value] if key == "data" else value)
    settings = read_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config", "func")}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in list(settings.items()) + list(flags.items()):
        if key == "data":
            items = value if isinstance(value, list) else [v for v in value.split(",") if v.strip()]
            cfg.data = [parse_data_spec(v.strip()) for v in items]
        elif key.startswith("hyper."):
            try:
                cfg.hyper[key[6:]] = float(value)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {value!r}") from None
        elif key == "hyper":
            for item in value:
                name, sep, v = item.partition("=")
                if not sep:
                    raise ConfigError(f"--hyper expects name=value, got {item!r}")
                try:
                    cfg.hyper[name.strip()] = float(v)
                except ValueError:
                    raise ConfigError(f"bad value for hyper {name}: {v!r}") from None
        elif key in known:
            setattr(cfg, key, _coerce(key, value))
        elif key in settings and key not in flags:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg.validate()


# -- file helpers --------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json_atomic(path, obj):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


@contextlib.contextmanager
def run_lock(directory):
    """One run at a time per output directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"{directory} is locked by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield directory
    finally:
        lock.unlink(missing_ok=True)


def _fmt(x) -> str:
    return repr(float(x))


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- data and model assembly ---------------------------------------------------

def load_dataset(cfg: RunConfig) -> PeriodizedDataset:
    matches = []
    for path, season in cfg.data:
        try:
            with open(path, "rb") as fh:
                matches.extend(parse_matches(fh, season=season))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
    return periodize(matches)


def collapse_periods(ds: PeriodizedDataset) -> PeriodizedDataset:
    """Put every match into a single period (static abilities)."""
    return PeriodizedDataset(ds.matches, ds.registry, np.ones(len(ds), dtype=np.int64), 1)


def prepare(cfg: RunConfig):
    """Dataset, train/holdout split and model spec for a run."""
    dataset = load_dataset(cfg)
    split = split_for_scenario(dataset, cfg.scenario)
    train, holdout = split.train, split.holdout
    if cfg.dynamics == Dynamics.STATIC.value:
        train, holdout = collapse_periods(train), collapse_periods(holdout)
    spec = ModelSpec(Family(cfg.family), Dynamics(cfg.dynamics), len(dataset.registry),
                     train.n_periods, cfg.hyper_params())
    return dataset, train, holdout, spec


# -- commands ------------------------------------------------------------------

def cmd_fit(cfg: RunConfig) -> Path:
    with run_lock(cfg.out) as out:
        timings = {}
        t0 = time.perf_counter()
        dataset, train, holdout, spec = prepare(cfg)
        timings["load"] = time.perf_counter() - t0
        log.info("fitting %s/%s: %d teams, %d periods, %d training matches",
                 spec.family.value, spec.dynamics.value, spec.n_teams, spec.n_periods, len(train))

        t0 = time.perf_counter()
        draws = fit_posterior(train, spec, cfg.sampler())
        timings["sample"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        space = ParameterSpace(spec)
        flat = space.flatten(draws.draws)  # (chains, iterations, constrained)
        names = space.constrained_names
        _write_rows(out / "draws.csv", ["chain", "iteration", *names],
                    ([c + 1, i + 1, *map(_fmt, flat[c, i])]
                     for c in range(flat.shape[0]) for i in range(flat.shape[1])))
        diag = summarize(flat, names, int(draws.divergences.sum()))
        _write_rows(out / "diagnostics.csv", ["parameter", "rhat", "ess_bulk", "ess_tail", "degenerate"],
                    ([n, _fmt(r), _fmt(b), _fmt(t), int(d)] for n, r, b, t, d in diag.rows()))
        abil = summarize_abilities(draws, space, dataset.registry.names)
        _write_rows(out / "abilities.csv", ["team", "period", "type", "mean", "q25", "q75", "q025", "q975"],
                    ([team, period, kind, *map(_fmt, vals)] for team, period, kind, *vals in abil.rows()))
        timings["report"] = time.perf_counter() - t0

        files = ["draws.csv", "diagnostics.csv", "abilities.csv"]
        manifest = {
            "command": "fit",
            "version": __version__,
            "config": cfg.echo(),
            "config_hash": cfg.digest(),
            "data": [{"path": p, "season": s, "sha256": sha256_file(p)} for p, s in cfg.data],
            "model": {"family": spec.family.value, "dynamics": spec.dynamics.value,
                      "n_teams": spec.n_teams, "n_periods": spec.n_periods,
                      "teams": list(dataset.registry.names),
                      "n_train": len(train), "n_holdout": len(holdout)},
            "diagnostics": {"max_rhat": diag.max_rhat, "min_ess_bulk": diag.min_ess_bulk,
                            "min_ess_tail": diag.min_ess_tail,
                            "divergences": [int(x) for x in draws.divergence_count]},
            "timings_seconds": timings,
            "files": {f: sha256_file(out / f) for f in files},
        }
        write_json_atomic(out / "manifest.json", manifest)
        print(f"fit: max R-hat {diag.max_rhat:.4f}, min bulk ESS {diag.min_ess_bulk:.0f}, "
              f"{int(draws.divergences.sum())} divergences -> {out}")
        return out


def load_manifest(out) -> dict:
    path = Path(out) / "manifest.json"
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArtifactMismatch(f"no fit artifacts in {out}") from None
    except json.JSONDecodeError as exc:
        raise ArtifactMismatch(f"unreadable manifest {path}: {exc}") from None


def load_draws(out, space: ParameterSpace) -> np.ndarray:
    """Unconstrained draws (n, dim) from ``draws.csv``."""
    with open(Path(out) / "draws.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[2:] != space.constrained_names:
            raise ArtifactMismatch("draws.csv columns do not match the model")
        flat = np.array([[float(v) for v in row[2:]] for row in reader])
    return space.unflatten(flat)


def cmd_forecast(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    manifest = load_manifest(out)
    if manifest.get("config_hash") != cfg.digest():
        raise ArtifactMismatch("fit artifacts were produced with a different configuration")
    for entry in manifest.get("data", []):
        if sha256_file(entry["path"]) != entry["sha256"]:
            raise ArtifactMismatch(f"data file changed since the fit: {entry['path']}")
    for name, digest in manifest.get("files", {}).items():
        if sha256_file(out / name) != digest:
            raise ArtifactMismatch(f"{name} does not match its manifest checksum")
    with run_lock(out):
        dataset, train, holdout, spec = prepare(cfg)
        space = ParameterSpace(spec)
        theta = load_draws(out, space)
        fixtures = [Fixture(m.home_team, m.away_team, int(p))
                    for m, p in zip(holdout.matches, holdout.period_of_match)]
        fs = forecast(theta, fixtures, spec, dataset.registry)
        _write_rows(out / "forecast.csv", ["match_id", "home", "away", "p_home", "p_draw", "p_away"],
                    ([m.match_id, m.home_team, m.away_team, *map(_fmt, p)]
                     for m, p in zip(holdout.matches, fs.probs)))
        manifest["files"]["forecast.csv"] = sha256_file(out / "forecast.csv")
        manifest["forecast"] = {"n_fixtures": len(fixtures), "max_tail_mass": float(np.max(fs.tail_mass, initial=0))}
        write_json_atomic(out / "manifest.json", manifest)
    print(f"forecast: {len(fixtures)} fixtures -> {out / 'forecast.csv'}")
    return out / "forecast.csv"


def read_forecasts(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"match_id", "p_home", "p_draw", "p_away"}
        if not need <= set(reader.fieldnames or ()):
            raise SchemaMismatch(f"{path}: forecast CSV needs columns {sorted(need)}")
        for row in reader:
            rows.append((row["match_id"], tuple(float(row[k]) for k in ("p_home", "p_draw", "p_away"))))
    return rows


def cmd_evaluate(forecast_path, results, out_path=None, labels=None) -> dict:
    """Score a forecast CSV against observed results."""
    observed = {}
    for path, season in results:
        with open(path, "rb") as fh:
            for m in parse_matches(fh, season=season):
                observed[m.match_id] = m.outcome
    items = []
    for match_id, p in read_forecasts(forecast_path):
        if match_id not in observed:
            raise UnmatchedFixture(f"no observed result for {match_id}")
        items.append(OutcomeProbs(p, observed[match_id]))
    report = {**(labels or {}), **evaluate(items).to_dict()}
    if out_path:
        write_json_atomic(out_path, report)
    print(json.dumps(report, sort_keys=True))
    return report


def compare_reports(reports):
    """Rows with per-league best-metric flags; ties are all flagged."""
    if len(reports) < 2:
        raise SchemaMismatch("compare needs at least two reports")
    for r in reports:
        missing = [k for k in REPORT_KEYS if k not in r]
        if missing:
            raise SchemaMismatch(f"report is missing {missing}")
        for k in METRICS:
            if not isinstance(r[k], (int, float)) or not math.isfinite(r[k]):
                raise SchemaMismatch(f"report field {k} is not a finite number")
    rows = []
    for r in reports:
        peers = [q for q in reports if q["league"] == r["league"]]
        flags = {}
        for k in METRICS:
            best = min(q[k] for q in peers) if LOWER_IS_BETTER[k] else max(q[k] for q in peers)
            flags[f"best_{k}"] = r[k] == best
        rows.append({**{k: r[k] for k in REPORT_KEYS}, **flags})
    return rows


def cmd_compare(paths, out_path=None):
    reports = []
    for p in paths:
        try:
            reports.append(json.loads(Path(p).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaMismatch(f"cannot read report {p}: {exc}") from None
        if not isinstance(reports[-1], dict):
            raise SchemaMismatch(f"report {p} is not a JSON object")
    rows = compare_reports(reports)
    header = list(rows[0])
    if out_path:
        _write_rows(out_path, header, ([r[k] for k in header] for r in rows))
    widths = [max(len(h), 8) for h in header]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in rows:
        cells = [f"{r[k]:.4f}" if isinstance(r[k], float) else str(r[k]) for k in header]
        print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
    return rows


def cmd_simulate(args):
    from .simulate import Truth, draw_truth, simulate_league, write_csv, write_truth

    stored = json.loads(Path(args.truth).read_text(encoding="utf-8")) if args.truth else None
    if stored is not None:
        # the truth file fixes the model and league size
        args.family, args.dynamics = stored["family"], stored["dynamics"]
        args.teams, args.periods = stored["n_teams"], stored["n_periods"]
    spec = ModelSpec(args.family, args.dynamics, args.teams, args.periods)
    if args.teams % 2 or args.periods % 2:
        raise ConfigError("simulate needs an even number of teams and periods (two periods per season)")
    rng = np.random.default_rng(args.seed)
    if stored is not None:
        params = stored["parameters"]
        space = ParameterSpace(spec)
        try:
            flat = np.array([params[n] for n in space.constrained_names])
        except KeyError as exc:
            raise ConfigError(f"truth file lacks parameter {exc}") from None
        truth = Truth(spec, space.constrain(space.unflatten(flat)))
    else:
        truth = draw_truth(spec, rng, step_sd=args.step_sd)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataset = simulate_league(truth, rng)
    write_csv(dataset, out / "matches.csv")
    write_truth(truth, out / "truth.json")
    print(f"simulate: {len(dataset)} matches -> {out / 'matches.csv'}")
    return out


# -- argument parsing ----------------------------------------------------------

def _add_run_flags(p):
    p.add_argument("--config", help="flat key = value settings file")
    p.add_argument("--data", action="append", metavar="PATH[:SEASON]", help="match CSV; repeatable")
    p.add_argument("--league")
    p.add_argument("--family", choices=[f.value for f in Family])
    p.add_argument("--dynamics", choices=[d.value for d in Dynamics])
    p.add_argument("--scenario", help="second-half, last3, last1 or cutoff=N")
    p.add_argument("--chains", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--target-accept", dest="target_accept", type=float)
    p.add_argument("--max-tree-depth", dest="max_tree_depth", type=int)
    p.add_argument("--jobs", type=int, help="chains run in parallel threads")
    p.add_argument("--hyper", action="append", metavar="NAME=VALUE", help="hyperparameter override")
    p.add_argument("--out", help="run directory")


def make_parser():
    parser = argparse.ArgumentParser(prog="dynfoot", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_run_flags(sub.add_parser("fit", help="sample the posterior and write run artifacts"))
    _add_run_flags(sub.add_parser("forecast", help="outcome probabilities for the holdout fixtures"))

    p = sub.add_parser("evaluate", help="score a forecast CSV against results")
    p.add_argument("forecast", help="forecast CSV, or a run directory containing forecast.csv")
    p.add_argument("--data", action="append", metavar="PATH[:SEASON]",
                   help="result CSV(s); defaults to the run's data")
    p.add_argument("--league")
    p.add_argument("--family")
    p.add_argument("--dynamics")
    p.add_argument("--out", help="metrics JSON path")

    p = sub.add_parser("compare", help="tabulate metric reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", help="CSV path for the table")

    p = sub.add_parser("simulate", help="sample a synthetic league")
    p.add_argument("--family", choices=[f.value for f in Family], default="dp")
    p.add_argument("--dynamics", choices=[d.value for d in Dynamics], default="owen")
    p.add_argument("--teams", type=int, default=18)
    p.add_argument("--periods", type=int, default=2)
    p.add_argument("--step-sd", dest="step_sd", type=float, default=None,
                   help="sd of period-to-period ability steps")
    p.add_argument("--truth", help="truth JSON to simulate from instead of drawing one")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="sim")
    return parser


def _evaluate_from_args(args):
    target = Path(args.forecast)
    run_dir = target if target.is_dir() else target.parent
    forecast_path = target / "forecast.csv" if target.is_dir() else target
    manifest = {}
    if (run_dir / "manifest.json").exists():
        manifest = load_manifest(run_dir)
    cfg = manifest.get("config", {})
    labels = {
        "league": args.league or cfg.get("league", "league"),
        "family": args.family or cfg.get("family", ""),
        "dynamics": args.dynamics or cfg.get("dynamics", ""),
        "scenario": cfg.get("scenario", ""),
    }
    results = [parse_data_spec(d) for d in args.data] if args.data else [tuple(d) for d in cfg.get("data", [])]
    if not results:
        raise ConfigError("no result data: pass --data or evaluate a run directory")
    out = args.out or (run_dir / "metrics.json" if target.is_dir() else None)
    return cmd_evaluate(forecast_path, results, out, labels)


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "fit":
            cmd_fit(build_config(args))
        elif args.command == "forecast":
            base = None
            if args.data is None and args.config is None and args.out is not None:
                # bare ``forecast --out DIR`` reuses the configuration stored by fit
                base = load_manifest(args.out).get("config")
            cmd_forecast(build_config(args, base))
        elif args.command == "evaluate":
            _evaluate_from_args(args)
        elif args.command == "compare":
            cmd_compare(args.reports, args.out)
        elif args.command == "simulate":
            cmd_simulate(args)
    except DynfootError as exc:
        print(f"dynfoot: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"dynfoot: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
