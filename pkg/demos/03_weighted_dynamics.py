"""
When does the weighted prior borrow strength?
=============================================

The weighted dynamics give each period its own evolution precision phi
with a spike (phi near 100: abilities carried over) and a slab (phi near 0:
abilities free to move).  We simulate two 18-team leagues, one where
abilities do not change between the halves of a season and one with large
shocks, and compare the posterior of phi for the attack abilities.

The hyperprior puts 99% of its mass on the slab, so the spike has to be
earned from the data: with much smaller leagues the stable case stays in the
slab too, and even at this size a single simulated league can be ambiguous.
"""

# %%
import numpy as np

from dynfoot.posterior import fit
from dynfoot.predict import summarize_abilities
from dynfoot.sampler import SamplerConfig
from dynfoot.simulate import draw_truth, simulate_league
from dynfoot.space import ModelSpec, ParameterSpace

spec = ModelSpec("dp", "weighted", 18, 2)
space = ParameterSpace(spec)
config = SamplerConfig(n_chains=2, n_warmup=300, n_samples=500, seed=0)

# %%
for label, step_sd in (("stable", 0.0), ("shocked", 1.0)):
    rng = np.random.default_rng(0)
    truth = draw_truth(spec, rng, step_sd=step_sd)
    league = simulate_league(truth, rng)
    draws = fit(league, spec, config)
    phi = space.constrain(draws.flat()).phi_att[:, 0]
    print(f"{label:8s} {len(league)} matches  P(phi > 50) = {np.mean(phi > 50):.2f}  "
          f"P(phi < 10) = {np.mean(phi < 10):.2f}  kernel acceptance {draws.kernel_accept.mean():.2f}")

    # %%
    # Posterior attack abilities against the truth, for the first three teams.
    summary = summarize_abilities(draws, space, league.registry.names)
    for i in range(3):
        est = " ".join(f"{summary.mean[0, i, t]:+.2f}" for t in range(2))
        true = " ".join(f"{truth.view.att[i, t]:+.2f}" for t in range(2))
        print(f"    {league.registry.names[i]}  posterior mean {est}   truth {true}")
