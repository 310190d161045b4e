"""Bayesian dynamic score models for football results.

Six score likelihoods (double Poisson, bivariate Poisson, diagonal-inflated
bivariate Poisson, negative binomial, Skellam, zero-inflated Skellam) under
four ability dynamics (static, owen, egidi, weighted spike/slab), sampled
with a self-contained NUTS implementation.
"""

from .data import (
    FitSplit,
    MatchRecord,
    PeriodizedDataset,
    TeamRegistry,
    assign_rounds,
    parse_matches,
    periodize,
    split_for_scenario,
)
from .diagnostics import ess_bulk, ess_tail, split_rhat, summarize
from .likelihoods import Family, FamilyParams, ScoringRates, log_pmf
from .metrics import MetricReport, OutcomeProbs, evaluate
from .posterior import Posterior, PrecisionKernel, fit, log_posterior
from .predict import AbilitySummary, Fixture, ForecastSet, forecast, summarize_abilities
from .sampler import PosteriorDraws, SamplerConfig, sample
from .space import Dynamics, HyperParams, ModelSpec, ParameterSpace, ParameterView, build_space, log_prior

__version__ = "0.1.0"

__all__ = [
    "AbilitySummary", "Dynamics", "Family", "FamilyParams", "FitSplit", "Fixture", "ForecastSet",
    "HyperParams", "MatchRecord", "MetricReport", "ModelSpec", "OutcomeProbs", "ParameterSpace",
    "ParameterView", "PeriodizedDataset", "Posterior", "PosteriorDraws", "PrecisionKernel",
    "SamplerConfig", "ScoringRates", "TeamRegistry", "assign_rounds", "build_space", "ess_bulk",
    "ess_tail", "evaluate", "fit", "forecast", "log_pmf", "log_posterior", "log_prior",
    "parse_matches", "periodize", "sample", "split_for_scenario", "split_rhat", "summarize",
    "summarize_abilities",
]
