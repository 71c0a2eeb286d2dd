"""
Tukey's representation for exponential-family observed-data models.

The joint of (Y, R) is specified by the observed-data density f_obs, a
logistic missingness mechanism and the observed fraction Q. Every mechanism
is first reduced to the canonical form

    P(R = 1 | y) = kappa / (1 + exp(alpha0 + alpha1 * y + alpha2 * y**2))

whose linear predictor is the log-odds of *missingness* (up to the kappa
asymptote). The missing-data density is then the observed density times the
odds of missingness, which for Gaussian components is an exponential tilt of
the natural parameter by (alpha1, alpha2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np
from scipy.special import expit, logsumexp

from .dataset import Dataset
from .expfam import (
    IntegrabilityError,
    MixtureModel,
    _from_masses,
    merge,
    mixture_log_density,
)

__all__ = [
    "LinearLogit", "QuadraticLogit", "AsymptoteLogit", "MechanismSpec",
    "CanonicalMechanism", "TukeyModel", "Violation", "canonicalize",
    "spec_intercept", "selection_prob", "odds_missing", "tilt_mass",
    "log_tilt_mass", "q_closed_form", "solve_intercept", "missing_model",
    "complete_model", "complete_moments", "validate", "observed_loglik",
]


# --- mechanism specifications -------------------------------------------------

@dataclass(frozen=True)
class LinearLogit:
    """P(R=1|y) = logistic(b0 + b1 y)."""

    b0: float | None
    b1: float


@dataclass(frozen=True)
class QuadraticLogit:
    """P(R=1|y) = logistic(-(b0 + b2 (y - b1)**2)); b1 is the most-observed value."""

    b0: float | None
    b1: float
    b2: float


@dataclass(frozen=True)
class AsymptoteLogit:
    """P(R=1|y) = kappa * logistic(b0 + b1 y); 1 - kappa is missing completely at random."""

    b0: float | None
    b1: float
    kappa: float


MechanismSpec = Union[LinearLogit, QuadraticLogit, AsymptoteLogit]


@dataclass(frozen=True)
class CanonicalMechanism:
    kappa: float = 1.0
    alpha0: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa!r}")
        if not all(math.isfinite(a) for a in (self.alpha0, self.alpha1, self.alpha2)):
            raise ValueError("mechanism coefficients must be finite")

    @property
    def is_mcar(self) -> bool:
        """True when the odds of missingness do not depend on y."""
        return self.alpha1 == 0.0 and self.alpha2 == 0.0

    def predictor(self, y):
        y = np.asarray(y, dtype=float)
        return self.alpha0 + self.alpha1 * y + self.alpha2 * y**2

    def log_odds_missing(self, y):
        """log[(1 - kappa)/kappa + exp(predictor)/kappa], overflow-safe."""
        lp = self.predictor(y)
        if self.kappa == 1.0:
            return lp
        return np.logaddexp(math.log1p(-self.kappa), lp) - math.log(self.kappa)

    def with_intercept(self, alpha0: float) -> "CanonicalMechanism":
        return replace(self, alpha0=float(alpha0))


def canonicalize(spec: MechanismSpec) -> CanonicalMechanism:
    """Map a mechanism specification onto the canonical missing-odds form.

    An unset intercept (``b0=None``) maps to ``alpha0=0``; use
    :func:`solve_intercept` to fill it from a target Q.
    """
    if isinstance(spec, LinearLogit):
        b0 = 0.0 if spec.b0 is None else spec.b0
        return CanonicalMechanism(1.0, -b0, -spec.b1, 0.0)
    if isinstance(spec, QuadraticLogit):
        if spec.b2 < 0:
            raise ValueError(f"QuadraticLogit requires b2 >= 0, got {spec.b2!r}")
        b0 = 0.0 if spec.b0 is None else spec.b0
        return CanonicalMechanism(1.0, b0 + spec.b2 * spec.b1**2,
                                  -2.0 * spec.b2 * spec.b1, spec.b2)
    if isinstance(spec, AsymptoteLogit):
        if not 0.0 < spec.kappa <= 1.0:
            raise ValueError(f"AsymptoteLogit requires kappa in (0, 1], got {spec.kappa!r}")
        b0 = 0.0 if spec.b0 is None else spec.b0
        return CanonicalMechanism(spec.kappa, -b0, -spec.b1, 0.0)
    raise TypeError(f"unknown mechanism specification {spec!r}")


def spec_intercept(spec: MechanismSpec, alpha0: float) -> float:
    """The user-facing intercept b0 matching a canonical alpha0."""
    if isinstance(spec, QuadraticLogit):
        return alpha0 - spec.b2 * spec.b1**2
    return -alpha0


def selection_prob(mech: CanonicalMechanism, y):
    return mech.kappa * expit(-mech.predictor(y))


def odds_missing(mech: CanonicalMechanism, y):
    return np.exp(mech.log_odds_missing(y))


# --- normalizing constant -----------------------------------------------------

def _check_integrable(obs: MixtureModel, mech: CanonicalMechanism):
    bad = np.flatnonzero(obs.eta2 + mech.alpha2 >= 0)
    if bad.size and obs.lam > 0:
        raise IntegrabilityError(
            f"integrability violated for component(s) {bad.tolist()}: "
            f"eta2 + alpha2 >= 0 (alpha2={float(mech.alpha2)!r})"
        )


def _log_tilt_terms(obs: MixtureModel, mech: CanonicalMechanism):
    """Log masses of the tilted components and atoms (before the intercept)."""
    a1, a2 = mech.alpha1, mech.alpha2
    with np.errstate(divide="ignore"):
        if obs.K:
            e1, e2 = obs.eta1 + a1, obs.eta2 + a2
            delta = (-e1**2 / (4 * e2) - 0.5 * np.log(-2 * e2)) - obs.log_normalizers
            comp = math.log(obs.lam) + np.log(obs.weights) + delta if obs.lam > 0 \
                else np.full(obs.K, -np.inf)
        else:
            e1 = e2 = comp = np.empty(0)
        if obs.M:
            g = obs.atom_locs
            atom = np.log1p(-obs.lam) + np.log(obs.atom_probs) + a1 * g + a2 * g**2
        else:
            atom = np.empty(0)
    return (e1, e2, comp), atom


def log_tilt_mass(obs: MixtureModel, mech: CanonicalMechanism) -> float:
    """log of E_obs[exp(alpha1 y + alpha2 y**2)]."""
    _check_integrable(obs, mech)
    (_, _, comp), atom = _log_tilt_terms(obs, mech)
    return float(logsumexp(np.concatenate([comp, atom])))


def tilt_mass(obs: MixtureModel, mech: CanonicalMechanism) -> float:
    return math.exp(log_tilt_mass(obs, mech))


def q_closed_form(obs: MixtureModel, mech: CanonicalMechanism) -> float:
    """Observed fraction Q = kappa / (1 + exp(alpha0) U)."""
    return mech.kappa * float(expit(-(mech.alpha0 + log_tilt_mass(obs, mech))))


def solve_intercept(obs: MixtureModel, mech: CanonicalMechanism, target_q: float,
                    check: bool = False) -> float:
    """Canonical intercept alpha0 giving observed fraction ``target_q``.

    The intercept already stored on ``mech`` is ignored. With ``check=True``
    the closed form is cross-checked against a bisection on
    :func:`q_closed_form`.
    """
    if not 0.0 < target_q < 1.0:
        raise ValueError(f"target Q must lie in (0, 1), got {target_q!r}")
    if target_q >= mech.kappa:
        raise ValueError(f"kappa must exceed Q (kappa={mech.kappa!r}, Q={target_q!r})")
    log_u = log_tilt_mass(obs, mech)
    alpha0 = math.log(mech.kappa - target_q) - math.log(target_q) - log_u
    if check:
        ref = _bisect_intercept(obs, mech, target_q)
        if abs(ref - alpha0) > 1e-8 * max(1.0, abs(alpha0)):
            raise ArithmeticError(f"intercept self-check failed: {alpha0!r} vs {ref!r}")
    return alpha0


def _bisect_intercept(obs, mech, target_q, tol=1e-13):
    # q_closed_form is strictly decreasing in alpha0
    def f(a0):
        return q_closed_form(obs, mech.with_intercept(a0)) - target_q

    lo, hi = -1.0, 1.0
    while f(lo) < 0:
        lo *= 2.0
    while f(hi) > 0:
        hi *= 2.0
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# --- missing and complete data ------------------------------------------------

@dataclass(frozen=True)
class TukeyModel:
    """Observed-data model, canonical mechanism and observed fraction Q.

    Construction does not enforce consistency; call :func:`validate` or use
    :meth:`from_parts`, which computes Q from the other two.
    """

    obs: MixtureModel
    mech: CanonicalMechanism
    q: float

    @classmethod
    def from_parts(cls, obs: MixtureModel, mech: CanonicalMechanism) -> "TukeyModel":
        return cls(obs, mech, q_closed_form(obs, mech))

    @classmethod
    def with_target_q(cls, obs: MixtureModel, mech: CanonicalMechanism,
                      q: float) -> "TukeyModel":
        return cls(obs, mech.with_intercept(solve_intercept(obs, mech, q)), q)


def missing_model(obs: MixtureModel, mech: CanonicalMechanism) -> MixtureModel:
    """Closed-form density of Y given R = 0.

    The odds of missingness split f_obs into an untilted copy weighted by
    (1 - kappa) and a tilted copy weighted by exp(alpha0) U, where every
    Gaussian component moves to eta + (alpha1, alpha2) and every atom is
    reweighted by exp(alpha1 g + alpha2 g**2).
    """
    _check_integrable(obs, mech)
    if mech.is_mcar:
        return obs
    (e1, e2, log_comp), log_atom = _log_tilt_terms(obs, mech)
    comp_keys = list(zip(e1.tolist(), e2.tolist()))
    comp_logm = [log_comp + mech.alpha0]
    atom_logm = [log_atom + mech.alpha0]
    if mech.kappa < 1.0:
        base = math.log1p(-mech.kappa)
        with np.errstate(divide="ignore"):
            comp_keys += list(zip(obs.eta1.tolist(), obs.eta2.tolist()))
            comp_logm.append(base + np.log(obs.lam) + np.log(obs.weights))
            atom_logm.append(base + np.log1p(-obs.lam) + np.log(obs.atom_probs))
    atom_keys = obs.atom_locs.tolist() * len(atom_logm)
    comp_logm = np.concatenate(comp_logm)
    atom_logm = np.concatenate(atom_logm)
    shift = np.max(np.concatenate([comp_logm, atom_logm]))
    comp_d: dict = {}
    for key, lm in zip(comp_keys, comp_logm):
        comp_d[key] = comp_d.get(key, 0.0) + math.exp(lm - shift)
    atom_d: dict = {}
    for g, lm in zip(atom_keys, atom_logm):
        atom_d[g] = atom_d.get(g, 0.0) + math.exp(lm - shift)
    return _from_masses(comp_d, atom_d)


def complete_model(model: TukeyModel) -> MixtureModel:
    """Q f_obs + (1 - Q) f_mis as one mixture."""
    if model.mech.is_mcar:
        return model.obs
    return merge([model.q, 1.0 - model.q], [model.obs, missing_model(model.obs, model.mech)])


def complete_moments(model: TukeyModel) -> tuple[float, float]:
    """Complete-data (mean, sd)."""
    m_obs, v_obs = model.obs.moments()
    if model.mech.is_mcar:
        return m_obs, math.sqrt(v_obs)
    m_mis, v_mis = missing_model(model.obs, model.mech).moments()
    q = model.q
    mean = q * m_obs + (1 - q) * m_mis
    second = q * (v_obs + m_obs**2) + (1 - q) * (v_mis + m_mis**2)
    return mean, math.sqrt(max(second - mean**2, 0.0))


# --- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    invariant: str
    message: str

    def __str__(self):
        return f"{self.invariant}: {self.message}"


def validate(model: TukeyModel, q_tol: float = 1e-10) -> list[Violation]:
    """List every broken invariant of ``model``; never raises."""
    out: list[Violation] = []
    obs, mech, q = model.obs, model.mech, model.q
    if not 0.0 < mech.kappa <= 1.0:
        out.append(Violation("kappa_range", f"kappa={mech.kappa!r} not in (0, 1]"))
    if not 0.0 < q < 1.0:
        out.append(Violation("q_range", f"q={q!r} not in (0, 1)"))
    if q >= mech.kappa:
        out.append(Violation("q_exceeds_kappa",
                             f"q exceeds kappa (q={q!r}, kappa={mech.kappa!r})"))
    integrable = True
    if obs.lam > 0:
        for k, e2 in enumerate(obs.eta2):
            if not e2 + mech.alpha2 < 0:
                integrable = False
                out.append(Violation(
                    "integrability",
                    f"component {k}: eta2 + alpha2 = {float(e2 + mech.alpha2)!r} >= 0 "
                    f"(sd={math.sqrt(-0.5 / e2)!r}, alpha2={float(mech.alpha2)!r})"))
    if integrable and not out:
        try:
            qc = q_closed_form(obs, mech)
        except (ValueError, ArithmeticError) as exc:
            out.append(Violation("q_consistency", str(exc)))
        else:
            if not abs(qc - q) <= q_tol:
                out.append(Violation(
                    "q_consistency", f"stored q={q!r} but mechanism implies {qc!r}"))
    return out


def observed_loglik(model: TukeyModel, data: Dataset) -> float:
    """n_obs log Q + n_mis log(1 - Q) + sum of observed log densities.

    When the missing count is unknown only the observed density enters.
    """
    y = data.y_obs
    ll = float(np.sum(mixture_log_density(model.obs, y))) if y.size else 0.0
    if data.n_missing_known:
        if data.n_obs:
            ll += data.n_obs * math.log(model.q)
        if data.n_missing:
            ll += data.n_missing * math.log1p(-model.q)
    return ll
