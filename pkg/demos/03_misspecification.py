"""
What happens when the observed-data model is only an approximation.

Complete data are N(0, 1); values are observed with probability
logistic(0.5 + b1 y). The mechanism is known exactly, but the observed-data
density is not a finite Normal mixture, so we approximate it with one. As b1
grows the observed density approaches a truncated Normal, selection
probabilities in the left tail approach zero, and the extrapolation degrades.

Run:  python demos/03_misspecification.py   (about a minute)
"""

import numpy as np

from tukeymiss.inference import McmcConfig
from tukeymiss.studies import robust42_cell

for n, K in [(100, 3), (1000, 5)]:
    for b1 in (1.0, 2.0, 5.0):
        errs, naive = [], []
        for rep in range(5):
            mcmc = McmcConfig(chains=2, iterations=1000, burnin=500, seed=rep)
            est, truth, data = robust42_cell(n, K, b1, seed=100 * rep + n, mcmc=mcmc)
            errs.append(abs(np.median(est.complete_mean)))
            naive.append(abs(data.y_obs.mean()))
        print(f"n={n:5d} K={K} b1={b1:.0f}: median |error| Tukey {np.median(errs):.3f}"
              f"   observed-data mean {np.median(naive):.3f}")
