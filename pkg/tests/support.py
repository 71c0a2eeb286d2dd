"""Random-model generators and reference configurations shared by the tests."""

import numpy as np

from tukeymiss.core import CanonicalMechanism, QuadraticLogit, TukeyModel, canonicalize
from tukeymiss.expfam import MixtureModel

SIM41_OBS = dict(lam=0.8, weights=[0.3, 0.4, 0.3], means=[-2.0, 0.0, 3.0], sds=[1.0, 1.0, 1.0],
                 atom_probs=np.full(9, 1 / 9), atom_locs=np.arange(-4.0, 5.0))


def sim41_obs() -> MixtureModel:
    return MixtureModel.from_moments(**SIM41_OBS)


def sim41_mech():
    return canonicalize(QuadraticLogit(None, -2.0, 0.06))


def random_obs(rng: np.random.Generator, max_k=3, max_m=3) -> MixtureModel:
    K = int(rng.integers(0, max_k + 1))
    M = int(rng.integers(0 if K else 1, max_m + 1))
    lam = 1.0 if M == 0 else (0.0 if K == 0 else float(rng.uniform(0.2, 0.95)))
    w = rng.dirichlet(np.ones(K)) if K else []
    p = rng.dirichlet(np.ones(M)) if M else []
    locs = np.sort(rng.choice(np.arange(-6, 7), size=M, replace=False)).astype(float) if M else []
    return MixtureModel.from_moments(lam, w, rng.uniform(-3, 3, K), rng.uniform(0.4, 2.5, K), p, locs)


def random_mechanism(rng: np.random.Generator, obs: MixtureModel, quadratic=True,
                     kappa_range=(0.3, 1.0)) -> CanonicalMechanism:
    """A mechanism integrable against ``obs`` with moderate tilt."""
    kappa = 1.0 if rng.random() < 0.5 else float(rng.uniform(*kappa_range))
    a2 = 0.0
    if quadratic and rng.random() < 0.7:
        cap = 0.8 * float(np.min(-obs.eta2)) if obs.K else 0.3
        a2 = float(rng.uniform(-0.3, min(cap, 0.3)))
    return CanonicalMechanism(kappa, float(rng.uniform(-3, 3)), float(rng.uniform(-1.5, 1.5)), a2)


def random_tukey(rng, **kw) -> TukeyModel:
    obs = random_obs(rng, **kw)
    return TukeyModel.from_parts(obs, random_mechanism(rng, obs))


