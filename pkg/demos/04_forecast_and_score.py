"""
From fit to scores
==================

The full loop on a simulated league: fit the first three half-seasons,
forecast the last one, and score the forecasts with Brier, ACP, RPS and
pseudo-R^2.  The same pipeline runs from the command line as
``dynfoot fit``, ``dynfoot forecast`` and ``dynfoot evaluate``.
"""

# %%
import numpy as np

from dynfoot.data import split_for_scenario
from dynfoot.metrics import OutcomeProbs, evaluate
from dynfoot.posterior import fit
from dynfoot.predict import Fixture, forecast
from dynfoot.sampler import SamplerConfig
from dynfoot.simulate import draw_truth, simulate_league
from dynfoot.space import ModelSpec, ParameterSpace

rng = np.random.default_rng(11)
truth = draw_truth(ModelSpec("bp", "owen", 8, 4), rng, ability_sd=0.4)
league = simulate_league(truth, rng)

# %%
# Hold out the second half of the last season.
split = split_for_scenario(league, "second-half")
print(f"{len(split.train)} training matches, {len(split.holdout)} to forecast")
fixtures = [Fixture(m.home_team, m.away_team, int(p))
            for m, p in zip(split.holdout.matches, split.holdout.period_of_match)]

# %%
config = SamplerConfig(n_chains=2, n_warmup=200, n_samples=200, seed=5)
results = {}
for family, dynamics in (("bp", "owen"), ("bp", "weighted"), ("dp", "owen")):
    spec = ModelSpec(family, dynamics, 8, split.train.n_periods)
    draws = fit(split.train, spec, config)
    fc = forecast(draws, fixtures, spec, league.registry)
    items = [OutcomeProbs(tuple(p), m.outcome) for p, m in zip(fc.probs, split.holdout.matches)]
    results[(family, dynamics)] = evaluate(items)

# %%
# Two reference points: forecasts from the true parameters (the best any
# model could hope for on these fixtures) and a uniform forecast (Brier 2/3,
# ACP 1/3).  With eight teams and 168 training matches the fitted abilities
# are noisy and overconfident, and on 56 fixtures the scores themselves are
# noisy: here the fitted models land close to the uniform forecast and well
# behind the truth.
true_spec = ModelSpec("bp", "owen", 8, 4)
oracle = forecast(ParameterSpace(true_spec).unconstrain(truth.view)[None], fixtures, true_spec, league.registry)
results[("truth", "")] = evaluate([OutcomeProbs(tuple(p), m.outcome)
                                   for p, m in zip(oracle.probs, split.holdout.matches)])
uniform = evaluate([OutcomeProbs((1 / 3, 1 / 3, 1 / 3), m.outcome) for m in split.holdout.matches])
print(f"{'model':14s} {'brier':>6s} {'acp':>6s} {'rps':>6s} {'r2':>6s}")
for (family, dynamics), r in [*results.items(), (("uniform", ""), uniform)]:
    print(f"{(family + '/' + dynamics).rstrip('/'):14s} {r.brier:6.3f} {r.acp:6.3f} {r.rps:6.3f} {r.pseudo_r2:6.3f}")
