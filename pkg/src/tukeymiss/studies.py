"""
The two simulation studies, as reusable cells.

``sim41``: semicontinuous three-component observed model with a quadratic
mechanism, analysed at growing sample sizes and in the infinite-data limit
where the observed-data model and Q are pinned to the truth.

``robust42``: complete data N(0, 1) selected by a logistic-linear mechanism,
analysed with a Normal mixture for the observed data and the mechanism
treated as known.
"""

from __future__ import annotations

import json
from dataclasses import replace
from importlib import resources

import numpy as np

from .core import LinearLogit, complete_model
from .inference import (
    KnownMechanism,
    McmcConfig,
    PointPrior,
    PriorConfig,
    fit,
    posterior_estimands,
)
from .simulate import SimConfig, reference_sim41, simulate, simulate_selection_normal

QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
QUANTILE_COLUMNS = ["q025", "q25", "median", "q75", "q975"]


def reference_config(name: str) -> dict:
    return json.loads(resources.files("tukeymiss").joinpath("configs", name).read_text())


def sim41_prior() -> PriorConfig:
    from .data_io import parse_config

    return parse_config(reference_config("sim41_prior.json"))


def derive_seed(*keys: int) -> int:
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def quantile_row(x: np.ndarray) -> dict:
    return dict(zip(QUANTILE_COLUMNS, map(float, np.quantile(x, QUANTILES))))


def sim41_cell(N: int | None, seed: int, mcmc: McmcConfig,
               prior: PriorConfig | None = None, point_mechanism: bool = False):
    """Posterior estimand draws for one sample size (``None`` = infinite data).

    Returns (EstimandDraws, TruthRecord). ``point_mechanism`` collapses the
    mechanism prior onto the true slope and curvature.
    """
    prior = prior or sim41_prior()
    cfg = reference_sim41(n=N or 1, seed=seed)
    truth_model = cfg.process.model
    if point_mechanism:
        prior = replace(prior, mechanism=PointPrior(cfg.process.spec))
    if N is None:
        from .dataset import Dataset
        from .simulate import true_estimands

        truth = true_estimands(cfg)
        draws = fit(Dataset([], []), prior, mcmc, pinned=truth_model.obs, pinned_q=truth_model.q)
    else:
        data, truth = simulate(SimConfig(cfg.process, N, seed, record_missing_values=False))
        draws = fit(data, prior, mcmc)
    est = posterior_estimands(draws, true_complete=complete_model(truth_model))
    return est, truth


def robust42_cell(n: int, K: int, b1: float, seed: int, mcmc: McmcConfig,
                  b0: float = 0.5, mu: float = 0.0, sigma: float = 1.0, **mixture_prior):
    """Posterior estimand draws for the misspecification study with a known mechanism."""
    data, truth = simulate_selection_normal(mu, sigma, b0, b1, n, seed,
                                            record_missing_values=False)
    prior = PriorConfig(K=K, mechanism=KnownMechanism(LinearLogit(b0, b1)), **mixture_prior)
    est = posterior_estimands(fit(data, prior, mcmc))
    return est, truth, data


def run_sim41(seed: int, mcmc: McmcConfig, sizes=(100, 1000, 10000, None)) -> list[dict]:
    rows = []
    for i, N in enumerate(sizes):
        cell_mcmc = replace(mcmc, seed=derive_seed(seed, i, 1))
        est, truth = sim41_cell(N, derive_seed(seed, i, 0), cell_mcmc)
        true_vals = {"complete_mean": truth.complete_mean, "complete_sd": truth.complete_sd,
                     "atom_max_error": 0.0}
        for name, x in est.as_columns().items():
            rows.append({"N": "inf" if N is None else N, "estimand": name,
                         **quantile_row(x), "truth": float(true_vals[name])})
    return rows


def run_robust42(seed: int, mcmc: McmcConfig, reps: int = 1) -> list[dict]:
    study = reference_config("robust42.json")
    rows = []
    for ci, cell in enumerate(study["cells"]):
        for bi, b1 in enumerate(study["b1"]):
            for rep in range(reps):
                cell_mcmc = replace(mcmc, seed=derive_seed(seed, ci, bi, rep, 1))
                est, truth, data = robust42_cell(
                    cell["n"], cell["K"], b1, derive_seed(seed, ci, bi, rep, 0), cell_mcmc,
                    b0=study["b0"], **study["complete"], **study["mixture_prior"])
                y = data.y_obs
                observed = {"complete_mean": float(np.mean(y)),
                            "complete_sd": float(np.std(y, ddof=1))}
                truths = {"complete_mean": truth.complete_mean, "complete_sd": truth.complete_sd}
                for name, x in est.as_columns().items():
                    q = quantile_row(x)
                    rows.append({"n": cell["n"], "K": cell["K"], "b1": float(b1), "rep": rep,
                                 "estimand": name, **q, "truth": float(truths[name]),
                                 "observed_estimate": observed[name],
                                 "abs_error": abs(q["median"] - truths[name])})
    return rows
