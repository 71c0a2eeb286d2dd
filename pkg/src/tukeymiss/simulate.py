"""
Data generation with known ground truth.

Tukey-specified processes are simulated along the pattern-mixture route:
R ~ Bernoulli(Q), then Y | R=1 from the observed-data model and Y | R=0 from
the closed-form missing-data model. The misspecification study instead
generates complete Normal data and selects it with a logistic mechanism.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate
from scipy.special import expit
from scipy.stats import norm

from .core import (
    MechanismSpec,
    TukeyModel,
    complete_moments,
    missing_model,
    spec_intercept,
    validate,
)
from .dataset import Dataset, TruthRecord
from .expfam import MixtureModel, sample_mixture


class ModelValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


@dataclass(frozen=True)
class TukeyProcess:
    model: TukeyModel
    spec: MechanismSpec | None = None


@dataclass(frozen=True)
class SelectionNormal:
    mu: float
    sigma: float
    b0: float
    b1: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")


@dataclass(frozen=True)
class SimConfig:
    process: Union[TukeyProcess, SelectionNormal]
    n: int
    seed: int
    record_missing_values: bool = True

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if isinstance(self.process, TukeyProcess):
            bad = validate(self.process.model)
            if bad:
                raise ModelValidationError(bad)


def model_params(model: TukeyModel, spec: MechanismSpec | None = None) -> dict:
    """Flattened, named generating parameters of a Tukey model."""
    obs, mech = model.obs, model.mech
    out: dict = {"lambda": obs.lam}
    for k in range(obs.K):
        out[f"w[{k + 1}]"] = float(obs.weights[k])
        out[f"mu[{k + 1}]"] = float(obs.means[k])
        out[f"sigma[{k + 1}]"] = float(obs.sds[k])
    for m in range(obs.M):
        out[f"p[{m + 1}]"] = float(obs.atom_probs[m])
        out[f"gamma[{m + 1}]"] = float(obs.atom_locs[m])
    out.update(kappa=mech.kappa, alpha0=mech.alpha0, alpha1=mech.alpha1,
               alpha2=mech.alpha2, q=model.q)
    if spec is not None:
        out["b0"] = spec_intercept(spec, mech.alpha0)
        out["b1"] = spec.b1
        if hasattr(spec, "b2"):
            out["b2"] = spec.b2
    return out


def simulate_tukey(model: TukeyModel, n: int, seed, spec: MechanismSpec | None = None,
                   record_missing_values: bool = True) -> tuple[Dataset, TruthRecord]:
    if n <= 0:
        raise ValueError("n must be positive")
    bad = validate(model)
    if bad:
        raise ModelValidationError(bad)
    rng = np.random.default_rng(seed)
    observed = rng.random(n) < model.q
    n_obs = int(observed.sum())
    values = np.full(n, np.nan)
    values[observed] = sample_mixture(model.obs, n_obs, rng)
    masked = sample_mixture(missing_model(model.obs, model.mech), n - n_obs, rng)
    mean, sd = complete_moments(model)
    truth = TruthRecord(model_params(model, spec), mean, sd, model.q,
                        masked.tolist() if record_missing_values else None)
    return Dataset(values, observed), truth


def selection_observed_fraction(mu, sigma, b0, b1) -> float:
    """P(R=1) = int logistic(b0 + b1 y) N(y; mu, sigma) dy."""
    val, _ = integrate.quad(lambda y: expit(b0 + b1 * y) * norm.pdf(y, mu, sigma),
                            mu - 12 * sigma, mu + 12 * sigma, epsabs=1e-13, epsrel=1e-12,
                            limit=200)
    return val


def simulate_selection_normal(mu, sigma, b0, b1, n, seed,
                              record_missing_values: bool = True) -> tuple[Dataset, TruthRecord]:
    """Complete data N(mu, sigma^2), selected with probability logistic(b0 + b1 y)."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    y = mu + sigma * rng.standard_normal(n)
    observed = rng.random(n) < expit(b0 + b1 * y)
    values = np.where(observed, y, np.nan)
    params = {"mu": mu, "sigma": sigma, "b0": b0, "b1": b1}
    truth = TruthRecord(params, float(mu), float(sigma),
                        selection_observed_fraction(mu, sigma, b0, b1),
                        y[~observed].tolist() if record_missing_values else None)
    return Dataset(values, observed), truth


def simulate(config: SimConfig) -> tuple[Dataset, TruthRecord]:
    proc = config.process
    if isinstance(proc, TukeyProcess):
        return simulate_tukey(proc.model, config.n, config.seed, proc.spec,
                              config.record_missing_values)
    return simulate_selection_normal(proc.mu, proc.sigma, proc.b0, proc.b1, config.n,
                                     config.seed, config.record_missing_values)


def true_estimands(config: SimConfig) -> TruthRecord:
    """Truth without generating data."""
    proc = config.process
    if isinstance(proc, TukeyProcess):
        mean, sd = complete_moments(proc.model)
        return TruthRecord(model_params(proc.model, proc.spec), mean, sd, proc.model.q)
    return TruthRecord({"mu": proc.mu, "sigma": proc.sigma, "b0": proc.b0, "b1": proc.b1},
                       float(proc.mu), float(proc.sigma),
                       selection_observed_fraction(proc.mu, proc.sigma, proc.b0, proc.b1))


def reference_sim41(n: int = 10_000, seed: int = 0, q: float = 0.5) -> SimConfig:
    """The semicontinuous three-component study configuration."""
    from .core import QuadraticLogit, canonicalize

    obs = MixtureModel.from_moments(0.8, [0.3, 0.4, 0.3], [-2.0, 0.0, 3.0], [1.0, 1.0, 1.0],
                                    np.full(9, 1 / 9), np.arange(-4.0, 5.0))
    spec = QuadraticLogit(None, -2.0, 0.06)
    model = TukeyModel.with_target_q(obs, canonicalize(spec), q)
    return SimConfig(TukeyProcess(model, spec), n, seed)
