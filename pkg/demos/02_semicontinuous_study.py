"""
Posterior inference when the mechanism is not identified.

1. simulate n = 10,000 values from the semicontinuous model with half missing;
2. fit the observed-data mixture by Gibbs sampling;
3. draw the selection curve from its prior and solve the intercept per draw;
4. push every joint draw forward to the complete-data mean and sd.

Then repeat with the observed-data model fixed at the truth (infinite data)
to see how much uncertainty is left: all of it comes from the mechanism.

Run:  python demos/02_semicontinuous_study.py   (about half a minute)
"""

import numpy as np

from tukeymiss.inference import McmcConfig
from tukeymiss.studies import sim41_cell

mcmc = McmcConfig(chains=2, iterations=1500, burnin=750, seed=1)


def show(label, est, truth):
    for name, t in [("complete_mean", truth.complete_mean), ("complete_sd", truth.complete_sd)]:
        x = est.as_columns()[name]
        lo, med, hi = np.quantile(x, [0.025, 0.5, 0.975])
        print(f"{label:>22s} {name:14s} median {med:7.3f}  95% ({lo:7.3f}, {hi:7.3f})  truth {t:.3f}")


est, truth = sim41_cell(10_000, seed=2017, mcmc=mcmc)
show("n = 10,000", est, truth)

est, truth = sim41_cell(None, seed=0, mcmc=mcmc)
show("infinite data", est, truth)

# collapse the mechanism prior onto the true curve: no uncertainty remains
est, truth = sim41_cell(None, seed=0, mcmc=mcmc, point_mechanism=True)
show("infinite data, known", est, truth)
