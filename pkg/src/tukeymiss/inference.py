"""
Posterior inference under Tukey's representation.

The observed-data likelihood factorizes into a Binomial term in Q and the
observed-data mixture density, and the mechanism slope never enters it. The
sampler therefore runs three independent pieces per chain:

* a data-augmentation Gibbs sampler for the observed-data mixture
  (conjugate Dirichlet/Beta/Normal updates, slice sampling for the bounded
  component standard deviations);
* conjugate Beta draws for Q from the observed and missing counts;
* prior draws of the mechanism, with the intercept solved so that the
  mechanism reproduces the drawn Q.

Each piece has its own random stream, so changing the mechanism seed leaves
the mixture and Q blocks untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .core import (
    AsymptoteLogit,
    CanonicalMechanism,
    LinearLogit,
    MechanismSpec,
    QuadraticLogit,
    TukeyModel,
    canonicalize,
    complete_model,
    complete_moments,
    missing_model,
    q_closed_form,
    solve_intercept,
    spec_intercept,
)
from .dataset import Dataset
from .expfam import MixtureModel, sample_mixture


class PriorIncompatibleError(RuntimeError):
    """The mechanism prior is (almost) never compatible with the fitted model."""


class DataPreconditionError(ValueError):
    """The data cannot support the requested operation."""


# --- configuration ----------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticPrior:
    """b1 ~ Normal(b1_mean, b1_sd), b2 ~ b2_scale * Beta(*b2_beta)."""

    b1_mean: float = -2.0
    b1_sd: float = 2.0
    b2_scale: float = 0.08
    b2_beta: tuple[float, float] = (3.0, 1.0)


@dataclass(frozen=True)
class AsymptotePrior:
    """b1 ~ Beta(*b1_beta), kappa ~ 1 - (1 - Q) Beta(*kappa_beta)."""

    b1_beta: tuple[float, float] = (1.0, 3.0)
    kappa_beta: tuple[float, float] = (2.0, 1.0)


@dataclass(frozen=True)
class LinearPrior:
    """b1 ~ Normal(b1_mean, b1_sd) for a logistic-linear mechanism."""

    b1_mean: float = 0.0
    b1_sd: float = 1.0


@dataclass(frozen=True)
class McarPrior:
    """Selection independent of y; the intercept alone matches Q."""


@dataclass(frozen=True)
class PointPrior:
    """Slope parameters fixed at ``spec``; its intercept is re-solved from Q."""

    spec: MechanismSpec


@dataclass(frozen=True)
class KnownMechanism:
    """Mechanism known exactly, intercept included; Q follows from the mixture."""

    spec: MechanismSpec


MechanismPrior = Union[QuadraticPrior, AsymptotePrior, LinearPrior, McarPrior,
                       PointPrior, KnownMechanism]


@dataclass(frozen=True)
class PriorConfig:
    K: int = 3
    atom_locations: tuple[float, ...] = ()
    mean_prior_sd: float = 10.0
    sd_prior_upper: float = 2.0
    weights_dirichlet: float = 1.0
    atoms_dirichlet: float = 1.0
    lambda_beta: tuple[float, float] = (1.0, 1.0)
    mechanism: MechanismPrior = field(default_factory=QuadraticPrior)
    q_beta: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        scales = (self.mean_prior_sd, self.sd_prior_upper, self.weights_dirichlet,
                  self.atoms_dirichlet, *self.lambda_beta, *self.q_beta)
        if not all(s > 0 for s in scales):
            raise ValueError("prior scales must be positive")
        if len(set(self.atom_locations)) != len(self.atom_locations):
            raise ValueError("atom locations must be distinct")
        mech = self.mechanism
        if isinstance(mech, QuadraticPrior) and not (mech.b1_sd >= 0 and mech.b2_scale > 0):
            raise ValueError("quadratic prior scales must be positive")
        if isinstance(mech, LinearPrior) and not mech.b1_sd >= 0:
            raise ValueError("linear prior scale must be non-negative")


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 4
    iterations: int = 5000
    burnin: int = 2500
    thin: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be at least 1")
        if not 0 <= self.burnin < self.iterations:
            raise ValueError("burnin must be below iterations")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def retained(self) -> int:
        return len(range(self.burnin, self.iterations, self.thin))


# --- draws containers -------------------------------------------------------------

@dataclass
class PosteriorDraws:
    """Retained joint draws: one row per (chain, iteration)."""

    chain: np.ndarray
    iteration: np.ndarray
    columns: dict[str, np.ndarray]

    def __len__(self):
        return self.chain.size

    @property
    def names(self) -> list[str]:
        return sorted(self.columns)

    def block(self, name: str) -> np.ndarray:
        keys = sorted((k for k in self.columns if k.startswith(name + "[")),
                      key=lambda k: int(k[len(name) + 1:-1]))
        if not keys:
            return np.empty((len(self), 0))
        return np.column_stack([self.columns[k] for k in keys])

    def obs_model(self, i: int) -> MixtureModel:
        return self.obs_models(np.array([i]))[0]

    def obs_models(self, index=None) -> list[MixtureModel]:
        index = np.arange(len(self)) if index is None else np.asarray(index)
        lam = self.columns["lambda"][index]
        blocks = [self.block(b)[index] for b in ("w", "mu", "sigma", "p", "gamma")]
        return [MixtureModel.from_moments(lam[j], *(b[j] for b in blocks))
                for j in range(index.size)]

    def has_mechanism(self) -> bool:
        return "alpha0" in self.columns

    def mechanism(self, i: int) -> CanonicalMechanism:
        c = self.columns
        return CanonicalMechanism(c["kappa"][i], c["alpha0"][i], c["alpha1"][i], c["alpha2"][i])

    def tukey_model(self, i: int) -> TukeyModel:
        return TukeyModel(self.obs_model(i), self.mechanism(i), float(self.columns["q"][i]))

    def tukey_models(self) -> list[TukeyModel]:
        return [TukeyModel(obs, self.mechanism(i), float(self.columns["q"][i]))
                for i, obs in enumerate(self.obs_models())]

    def select(self, mask) -> "PosteriorDraws":
        return PosteriorDraws(self.chain[mask], self.iteration[mask],
                              {k: v[mask] for k, v in self.columns.items()})


@dataclass
class EstimandDraws:
    chain: np.ndarray
    complete_mean: np.ndarray
    complete_sd: np.ndarray
    atom_max_error: np.ndarray | None = None

    def as_columns(self) -> dict[str, np.ndarray]:
        out = {"complete_mean": self.complete_mean, "complete_sd": self.complete_sd}
        if self.atom_max_error is not None:
            out["atom_max_error"] = self.atom_max_error
        return out


# --- observed-data mixture sampler ------------------------------------------------

def slice_sample(x0: float, logp, rng: np.random.Generator, width: float,
                 max_doublings: int = 10, logp0: float | None = None) -> float:
    """One univariate slice-sampling update with the doubling procedure."""
    if logp0 is None:
        logp0 = logp(x0)
    log_y = logp0 - rng.exponential()
    left = x0 - width * rng.random()
    right = left + width
    for _ in range(max_doublings):
        if logp(left) <= log_y and logp(right) <= log_y:
            break
        if rng.random() < 0.5:
            left -= right - left
        else:
            right += right - left
    lo, hi = left, right
    while True:
        x1 = lo + (hi - lo) * rng.random()
        if logp(x1) > log_y and _doubling_accepts(x0, x1, log_y, left, right, width, logp):
            return x1
        if x1 < x0:
            lo = x1
        else:
            hi = x1


def _doubling_accepts(x0, x1, log_y, left, right, width, logp) -> bool:
    differ = False
    while right - left > 1.1 * width:
        mid = 0.5 * (left + right)
        if (x0 < mid) != (x1 < mid):
            differ = True
        if x1 < mid:
            right = mid
        else:
            left = mid
        if differ and logp(left) <= log_y and logp(right) <= log_y:
            return False
    return True


def _check_fit_inputs(y: np.ndarray, prior: PriorConfig):
    if y.size == 0:
        raise DataPreconditionError("no observed records")
    atoms = np.asarray(prior.atom_locations, dtype=float)
    cont = y[~np.isin(y, atoms)]
    if prior.K > np.unique(cont).size:
        raise DataPreconditionError(
            f"K={prior.K} exceeds the number of distinct non-atom observed values "
            f"({np.unique(cont).size})")
    return atoms, cont


def _mixture_chain(y: np.ndarray, prior: PriorConfig, mcmc: McmcConfig,
                   rng: np.random.Generator) -> dict[str, np.ndarray]:
    atoms, yc = _check_fit_inputs(y, prior)
    K, M = prior.K, atoms.size
    atom_counts = np.array([(y == g).sum() for g in atoms], dtype=float)
    n_cont = yc.size
    upper = prior.sd_prior_upper
    tau2 = prior.mean_prior_sd**2
    width = 0.1 * (np.std(yc) if n_cont > 1 and np.std(yc) > 0 else 1.0)

    mu = np.quantile(yc, (np.arange(K) + 0.5) / K)
    sigma = np.full(K, min(max(np.std(yc) / K, 1e-3), 0.5 * upper))
    w = np.full(K, 1.0 / K)
    yc2 = yc**2

    n_keep = mcmc.retained
    out = {"lambda": np.empty(n_keep), "w": np.empty((n_keep, K)),
           "mu": np.empty((n_keep, K)), "sigma": np.empty((n_keep, K)),
           "p": np.empty((n_keep, M))}
    j = 0
    for it in range(mcmc.iterations):
        lam = rng.beta(prior.lambda_beta[0] + n_cont, prior.lambda_beta[1] + y.size - n_cont) \
            if M else 1.0
        p = rng.dirichlet(prior.atoms_dirichlet + atom_counts) if M else np.empty(0)

        # allocations
        logp = np.log(w) - np.log(sigma) - 0.5 * ((yc[:, None] - mu) / sigma) ** 2
        logp -= logp.max(axis=1, keepdims=True)
        cdf = np.cumsum(np.exp(logp), axis=1)
        z = (cdf < rng.random(n_cont)[:, None] * cdf[:, -1:]).sum(axis=1)
        np.minimum(z, K - 1, out=z)
        nk = np.bincount(z, minlength=K).astype(float)
        s1 = np.bincount(z, weights=yc, minlength=K)
        s2 = np.bincount(z, weights=yc2, minlength=K)

        w = rng.dirichlet(prior.weights_dirichlet + nk)
        for k in range(K):
            prec = 1.0 / tau2 + nk[k] / sigma[k] ** 2
            mu[k] = s1[k] / sigma[k] ** 2 / prec + rng.standard_normal() / math.sqrt(prec)
            ss = max(s2[k] - 2 * mu[k] * s1[k] + nk[k] * mu[k] ** 2, 0.0)
            n_k = nk[k]

            def log_post(s, n_k=n_k, ss=ss):
                if not 0.0 < s < upper:
                    return -np.inf
                return -n_k * math.log(s) - ss / (2.0 * s * s)

            sigma[k] = slice_sample(sigma[k], log_post, rng, width)

        if it >= mcmc.burnin and (it - mcmc.burnin) % mcmc.thin == 0:
            out["lambda"][j] = lam
            out["w"][j], out["mu"][j], out["sigma"][j] = w, mu, sigma
            out["p"][j] = p
            j += 1
    return out


def _pinned_chain(obs: MixtureModel, n_keep: int) -> dict[str, np.ndarray]:
    return {"lambda": np.full(n_keep, obs.lam),
            "w": np.tile(obs.weights, (n_keep, 1)),
            "mu": np.tile(obs.means, (n_keep, 1)),
            "sigma": np.tile(obs.sds, (n_keep, 1)),
            "p": np.tile(obs.atom_probs, (n_keep, 1))}


def fit_observed_mixture(data: Dataset, prior: PriorConfig, mcmc: McmcConfig,
                         pinned: MixtureModel | None = None) -> PosteriorDraws:
    """Posterior draws of the observed-data mixture block.

    Only observed records enter. With ``pinned`` the block is fixed at the
    supplied model for every draw (the infinite-data limit).
    """
    y = data.y_obs
    atoms = np.asarray(prior.atom_locations, dtype=float)
    if pinned is None:
        _check_fit_inputs(y, prior)
    elif pinned.M and not np.array_equal(pinned.atom_locs, atoms):
        raise ValueError("pinned model atoms differ from the prior's atom locations")
    chains, iters, cols = [], [], []
    for c in range(mcmc.chains):
        if pinned is None:
            rng = np.random.default_rng([mcmc.seed, c, 0])
            cols.append(_mixture_chain(y, prior, mcmc, rng))
        else:
            cols.append(_pinned_chain(pinned, mcmc.retained))
        chains.append(np.full(mcmc.retained, c))
        iters.append(np.arange(mcmc.burnin, mcmc.iterations, mcmc.thin))
    columns: dict[str, np.ndarray] = {
        "lambda": np.concatenate([c["lambda"] for c in cols])}
    for name in ("w", "mu", "sigma", "p"):
        block = np.concatenate([c[name] for c in cols])
        for k in range(block.shape[1]):
            columns[f"{name}[{k + 1}]"] = block[:, k]
    n = columns["lambda"].size
    for m, g in enumerate(atoms):
        columns[f"gamma[{m + 1}]"] = np.full(n, g)
    return PosteriorDraws(np.concatenate(chains), np.concatenate(iters), columns)


# --- Q and mechanism --------------------------------------------------------------

def posterior_q(n_obs: int, n_mis: int | None, q_beta=(1.0, 1.0)) -> tuple[float, float]:
    """Beta parameters of the posterior of Q given the counts."""
    if n_obs < 0:
        raise ValueError("n_obs must be non-negative")
    if n_mis is None:
        return tuple(q_beta)
    if n_obs == 0 and n_mis == 0:
        raise DataPreconditionError("no records to update Q")
    return q_beta[0] + n_obs, q_beta[1] + n_mis


def _draw_raw_mechanism(prior: MechanismPrior, q: float, rng) -> tuple[MechanismSpec, dict]:
    if isinstance(prior, QuadraticPrior):
        b1 = prior.b1_mean + prior.b1_sd * rng.standard_normal()
        b2 = prior.b2_scale * rng.beta(*prior.b2_beta)
        return QuadraticLogit(None, b1, b2), {"b1": b1, "b2": b2}
    if isinstance(prior, AsymptotePrior):
        b1 = rng.beta(*prior.b1_beta)
        kappa = 1.0 - (1.0 - q) * rng.beta(*prior.kappa_beta)
        return AsymptoteLogit(None, b1, kappa), {"b1": b1}
    if isinstance(prior, LinearPrior):
        b1 = prior.b1_mean + prior.b1_sd * rng.standard_normal()
        return LinearLogit(None, b1), {"b1": b1}
    if isinstance(prior, McarPrior):
        return LinearLogit(None, 0.0), {}
    if isinstance(prior, PointPrior):
        spec = prior.spec
        raw = {"b1": spec.b1}
        if isinstance(spec, QuadraticLogit):
            raw["b2"] = spec.b2
        return spec, raw
    raise TypeError(f"cannot sample from {prior!r}")


def _compatible(spec: MechanismSpec, obs: MixtureModel, q: float) -> CanonicalMechanism | None:
    try:
        mech = canonicalize(spec)
    except ValueError:
        return None
    if q >= mech.kappa:
        return None
    if obs.lam > 0 and np.any(obs.eta2 + mech.alpha2 >= 0):
        return None
    return mech


def sample_mechanism(prior: PriorConfig, q_draw: float, theta: MixtureModel,
                     rng: np.random.Generator, max_attempts: int = 100_000):
    """Draw a mechanism from the prior and solve its intercept for ``q_draw``.

    Draws incompatible with ``theta`` (integrability) or with ``q_draw``
    (kappa <= Q) are rejected. Returns (mechanism, raw spec parameters).
    """
    if not 0.0 < q_draw < 1.0:
        raise ValueError("q_draw must lie in (0, 1)")
    mprior = prior.mechanism
    if isinstance(mprior, KnownMechanism):
        raise TypeError("a known mechanism determines Q; nothing to sample")
    accepted = attempts = 0
    while attempts < max_attempts:
        attempts += 1
        spec, raw = _draw_raw_mechanism(mprior, q_draw, rng)
        mech = _compatible(spec, theta, q_draw)
        if mech is None:
            if attempts == 100 and not _acceptance_ok(mprior, q_draw, theta, rng):
                break
            continue
        accepted += 1
        alpha0 = solve_intercept(theta, mech, q_draw)
        mech = mech.with_intercept(alpha0)
        if isinstance(spec, AsymptoteLogit):
            raw["kappa"] = spec.kappa
        raw["b0"] = spec_intercept(spec, alpha0)
        return mech, raw
    raise PriorIncompatibleError(
        "prior incompatible with fitted model: mechanism draws rejected at a rate above 99.9%")


def _acceptance_ok(mprior, q_draw, theta, rng, n=100_000) -> bool:
    """Whether more than 0.1% of prior draws are compatible."""
    ok = 0
    for _ in range(n):
        spec, _ = _draw_raw_mechanism(mprior, q_draw, rng)
        if _compatible(spec, theta, q_draw) is not None:
            ok += 1
            if ok > n // 1000:
                return True
    return False


def fit(data: Dataset, prior: PriorConfig, mcmc: McmcConfig,
        pinned: MixtureModel | None = None, pinned_q: float | None = None,
        mechanism_seed: int | None = None) -> PosteriorDraws:
    """Joint posterior draws: mixture block, Q and the mechanism.

    ``pinned``/``pinned_q`` fix the observed-data model and Q at known values.
    ``mechanism_seed`` overrides the seed of the mechanism stream only.
    """
    draws = fit_observed_mixture(data, prior, mcmc, pinned)
    n = len(draws)
    known = isinstance(prior.mechanism, KnownMechanism)
    if not known and pinned_q is None:
        a, b = posterior_q(data.n_obs, data.n_missing, prior.q_beta)
    mseed = mcmc.seed if mechanism_seed is None else mechanism_seed
    cols = {k: np.empty(n) for k in ("q", "kappa", "alpha0", "alpha1", "alpha2")}
    raw_cols: dict[str, np.ndarray] = {}
    thetas = draws.obs_models()
    for c in range(mcmc.chains):
        idx = np.flatnonzero(draws.chain == c)
        rng_q = np.random.default_rng([mcmc.seed, c, 1])
        rng_m = np.random.default_rng([mseed, c, 2])
        for i in idx:
            theta = thetas[i]
            if known:
                spec = prior.mechanism.spec
                mech = canonicalize(spec)
                q = q_closed_form(theta, mech)
                raw = {"b0": spec.b0, "b1": spec.b1}
                if isinstance(spec, QuadraticLogit):
                    raw["b2"] = spec.b2
            else:
                q = pinned_q if pinned_q is not None else rng_q.beta(a, b)
                mech, raw = sample_mechanism(prior, q, theta, rng_m)
            cols["q"][i] = q
            cols["kappa"][i], cols["alpha0"][i] = mech.kappa, mech.alpha0
            cols["alpha1"][i], cols["alpha2"][i] = mech.alpha1, mech.alpha2
            for key, val in raw.items():
                raw_cols.setdefault(key, np.full(n, np.nan))[i] = val
    draws.columns.update(cols)
    draws.columns.update(raw_cols)
    return draws


# --- estimands, imputation, summaries ---------------------------------------------

def posterior_estimands(draws: PosteriorDraws,
                        true_complete: MixtureModel | None = None) -> EstimandDraws:
    """Complete-data mean and sd for every joint draw.

    With ``true_complete`` also reports the largest absolute difference between
    the true and inferred complete-data atom masses.
    """
    n = len(draws)
    mean, sd = np.empty(n), np.empty(n)
    err = np.empty(n) if true_complete is not None else None
    for i, model in enumerate(draws.tukey_models()):
        mean[i], sd[i] = complete_moments(model)
        if err is not None:
            comp = complete_model(model)
            inferred = (1.0 - comp.lam) * comp.atom_probs
            truth = (1.0 - true_complete.lam) * true_complete.atom_probs
            if not np.array_equal(comp.atom_locs, true_complete.atom_locs):
                raise ValueError("atom locations differ from the truth")
            err[i] = np.max(np.abs(inferred - truth)) if truth.size else 0.0
    return EstimandDraws(draws.chain.copy(), mean, sd, err)


def impute(data: Dataset, draws: PosteriorDraws, m: int, seed) -> list[Dataset]:
    """``m`` completed datasets, each filled from one retained joint draw."""
    if not data.n_missing_known or data.n_missing == 0:
        raise DataPreconditionError("dataset has no missing records to impute")
    if m > len(draws):
        raise ValueError(f"m={m} exceeds the {len(draws)} retained draws")
    if m <= 0:
        return []
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(len(draws), size=m, replace=False))
    miss = ~data.observed
    out = []
    for i, obs in zip(picks, draws.obs_models(picks)):
        fmis = missing_model(obs, draws.mechanism(i))
        values = data.values.copy()
        values[miss] = sample_mixture(fmis, int(miss.sum()), rng)
        out.append(Dataset(values, np.ones(values.size, bool)))
    return out


def split_rhat(x: np.ndarray, chain: np.ndarray) -> float:
    """Split-chain potential scale reduction factor.

    Each chain is cut in half and the halves are compared. The variance
    estimate is W + B/n, so the statistic is exactly 1 when all half-chain
    means agree.
    """
    seqs = []
    for c in np.unique(chain):
        xc = x[chain == c]
        h = xc.size // 2
        if h < 2:
            return float("nan")
        seqs += [xc[:h], xc[xc.size - h:]]
    n = min(s.size for s in seqs)
    seqs = np.array([s[:n] for s in seqs])
    W = seqs.var(axis=1, ddof=1).mean()
    B = n * seqs.mean(axis=1).var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else float("inf")
    return float(math.sqrt((W + B / n) / W))


def summarize(columns: dict[str, np.ndarray], chain: np.ndarray | None = None) -> dict:
    """Median, central 95% interval and split R-hat per column."""
    out = {}
    for name in sorted(columns):
        x = np.asarray(columns[name], dtype=float)
        if np.all(np.isnan(x)):
            continue
        lo, med, hi = np.quantile(x, [0.025, 0.5, 0.975])
        row = {"median": float(med), "ci95": [float(lo), float(hi)]}
        if chain is not None and np.unique(chain).size >= 2:
            row["rhat"] = split_rhat(x, chain)
        out[name] = row
    return out
