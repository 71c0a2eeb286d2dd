"""
Gaussian exponential-family primitives and semicontinuous mixtures.

A Gaussian component is written in natural form

    f(y) = h(y) exp(eta1 * y + eta2 * y**2 - A(eta)),   h(y) = (2 pi)^(-1/2)

with log-normalizer A(eta) = -eta1**2 / (4 eta2) - log(-2 eta2) / 2. The
normalizing constant g(eta) used when tilting is exp(-A(eta)).

A semicontinuous mixture puts mass ``lam`` on a weighted sum of Gaussian
components and ``1 - lam`` on finitely many atoms. Densities are taken with
respect to Lebesgue measure plus counting measure on the atom locations, so a
value sitting exactly on an atom belongs to the discrete part.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
SUM_TOL = 1e-12


class ImproperComponentError(ValueError):
    """Raised when a Gaussian natural parameter has eta2 >= 0."""


class IntegrabilityError(ValueError):
    """Raised when an exponential tilt leaves the natural parameter space."""


@dataclass(frozen=True)
class GaussianNatural:
    """One Gaussian component in natural parametrization (eta1, eta2)."""

    eta1: float
    eta2: float

    def __post_init__(self):
        if not self.eta2 < 0:
            raise ImproperComponentError(
                f"improper component: eta2={self.eta2!r} must be negative"
            )

    @property
    def mean(self) -> float:
        return moments_from_natural(self)[0]

    @property
    def variance(self) -> float:
        return moments_from_natural(self)[1]


def log_normalizer(eta: GaussianNatural) -> float:
    """Log-normalizer A(eta) for the base measure h(y) = (2 pi)^(-1/2)."""
    if not eta.eta2 < 0:
        raise ImproperComponentError(f"improper component: eta2={eta.eta2!r}")
    return -eta.eta1**2 / (4.0 * eta.eta2) - 0.5 * np.log(-2.0 * eta.eta2)


def moments_from_natural(eta: GaussianNatural) -> tuple[float, float]:
    """Return (mean, variance) = (-eta1 / (2 eta2), -1 / (2 eta2))."""
    return -eta.eta1 / (2.0 * eta.eta2), -1.0 / (2.0 * eta.eta2)


def natural_from_moments(mean: float, variance: float) -> GaussianNatural:
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance!r}")
    return GaussianNatural(mean / variance, -0.5 / variance)


def tilt(eta: GaussianNatural, alpha1: float, alpha2: float,
         label: str = "component") -> GaussianNatural:
    """Shift the natural parameter by (alpha1, alpha2).

    Multiplying the density by exp(alpha1 * y + alpha2 * y**2) and
    renormalizing gives the same family with parameter eta + alpha.
    """
    eta2 = eta.eta2 + alpha2
    if not eta2 < 0:
        raise IntegrabilityError(
            f"integrability violated for {label}: eta2 + alpha2 = {eta2!r} >= 0"
        )
    return GaussianNatural(eta.eta1 + alpha1, eta2)


def _as_readonly(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MixtureModel:
    """Semicontinuous mixture of Gaussian components and point masses.

    Parameters
    ----------
    lam : float
        Fraction of mass on the continuous part.
    weights, eta1, eta2 : array_like
        Component weights (summing to one) and natural parameters.
    atom_probs, atom_locs : array_like
        Atom probabilities (summing to one) and distinct locations.
    """

    lam: float
    weights: np.ndarray
    eta1: np.ndarray
    eta2: np.ndarray
    atom_probs: np.ndarray
    atom_locs: np.ndarray

    def __init__(self, lam, weights=(), eta1=(), eta2=(), atom_probs=(), atom_locs=()):
        object.__setattr__(self, "lam", float(lam))
        for name, val in (("weights", weights), ("eta1", eta1), ("eta2", eta2),
                          ("atom_probs", atom_probs), ("atom_locs", atom_locs)):
            object.__setattr__(self, name, _as_readonly(val))
        self._check()

    def _check(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam!r}")
        K = self.weights.size
        if self.eta1.size != K or self.eta2.size != K:
            raise ValueError("weights, eta1 and eta2 must have equal length")
        if self.atom_probs.size != self.atom_locs.size:
            raise ValueError("atom_probs and atom_locs must have equal length")
        if np.any(self.eta2 >= 0):
            bad = np.flatnonzero(self.eta2 >= 0).tolist()
            raise ImproperComponentError(f"improper component(s) {bad}: eta2 >= 0")
        if self.lam > 0 and K == 0:
            raise ValueError("lam > 0 requires at least one component")
        if self.lam < 1 and self.atom_locs.size == 0:
            raise ValueError("lam < 1 requires at least one atom")
        for name, arr in (("weights", self.weights), ("atom_probs", self.atom_probs)):
            if arr.size == 0:
                continue
            if np.any(arr < 0) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite and non-negative")
            if abs(arr.sum() - 1.0) > SUM_TOL:
                raise ValueError(f"{name} must sum to one, got {arr.sum()!r}")
        if np.unique(self.atom_locs).size != self.atom_locs.size:
            raise ValueError("atom locations must be distinct")

    @classmethod
    def from_moments(cls, lam, weights=(), means=(), sds=(), atom_probs=(), atom_locs=()):
        var = np.asarray(sds, dtype=float) ** 2
        means = np.asarray(means, dtype=float)
        if np.any(var <= 0):
            raise ValueError("component standard deviations must be positive")
        return cls(lam, weights, means / var, -0.5 / var, atom_probs, atom_locs)

    @classmethod
    def gaussian(cls, mean: float = 0.0, sd: float = 1.0) -> "MixtureModel":
        return cls.from_moments(1.0, [1.0], [mean], [sd])

    @classmethod
    def atoms_only(cls, atom_probs, atom_locs) -> "MixtureModel":
        return cls(0.0, atom_probs=atom_probs, atom_locs=atom_locs)

    @property
    def K(self) -> int:
        return self.weights.size

    @property
    def M(self) -> int:
        return self.atom_locs.size

    @property
    def means(self) -> np.ndarray:
        return -self.eta1 / (2.0 * self.eta2)

    @property
    def variances(self) -> np.ndarray:
        return -0.5 / self.eta2

    @property
    def sds(self) -> np.ndarray:
        return np.sqrt(self.variances)

    @property
    def log_normalizers(self) -> np.ndarray:
        return -self.eta1**2 / (4.0 * self.eta2) - 0.5 * np.log(-2.0 * self.eta2)

    @property
    def components(self) -> list[tuple[float, GaussianNatural]]:
        return [(float(w), GaussianNatural(float(a), float(b)))
                for w, a, b in zip(self.weights, self.eta1, self.eta2)]

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return [(float(p), float(g)) for p, g in zip(self.atom_probs, self.atom_locs)]

    def moments(self) -> tuple[float, float]:
        """Analytic (mean, variance) of the mixture."""
        m1 = m2 = 0.0
        if self.K:
            mu = self.means
            m1 += self.lam * np.dot(self.weights, mu)
            m2 += self.lam * np.dot(self.weights, self.variances + mu**2)
        if self.M:
            m1 += (1.0 - self.lam) * np.dot(self.atom_probs, self.atom_locs)
            m2 += (1.0 - self.lam) * np.dot(self.atom_probs, self.atom_locs**2)
        return float(m1), float(m2 - m1**2)

    def equals(self, other: "MixtureModel") -> bool:
        """Field-wise exact equality."""
        return (self.lam == other.lam
                and all(np.array_equal(getattr(self, f), getattr(other, f))
                        for f in ("weights", "eta1", "eta2", "atom_probs", "atom_locs")))

    def __repr__(self):
        return (f"MixtureModel(lam={self.lam!r}, weights={self.weights.tolist()}, "
                f"means={self.means.tolist()}, sds={self.sds.tolist()}, "
                f"atom_probs={self.atom_probs.tolist()}, atom_locs={self.atom_locs.tolist()})")


def component_log_densities(model: MixtureModel, y: ArrayLike) -> np.ndarray:
    """Log densities of each Gaussian component, shape (n, K)."""
    y = np.asarray(y, dtype=float)[..., None]
    return (model.eta1 * y + model.eta2 * y**2 - model.log_normalizers - LOG_SQRT_2PI)


def continuous_log_density(model: MixtureModel, y: ArrayLike) -> np.ndarray:
    """log of sum_k w_k N(y; component k), ignoring lam and atoms."""
    y = np.asarray(y, dtype=float)
    if model.K == 0:
        return np.full(y.shape, -np.inf)
    with np.errstate(divide="ignore"):
        logw = np.log(model.weights)
    return logsumexp(component_log_densities(model, y) + logw, axis=-1)


def mixture_log_density(model: MixtureModel, y: ArrayLike):
    """Log density under the mixed (Lebesgue + atom counting) measure.

    At an atom location returns log((1 - lam) * p_m); elsewhere
    log(lam * sum_k w_k N(y; k)). Accepts scalars or arrays.
    """
    y_arr = np.asarray(y, dtype=float)
    scalar = y_arr.ndim == 0
    y_arr = np.atleast_1d(y_arr)
    out = np.empty(y_arr.shape)
    with np.errstate(divide="ignore"):
        if model.M:
            order = np.argsort(model.atom_locs)
            sorted_locs = model.atom_locs[order]
            idx = np.clip(np.searchsorted(sorted_locs, y_arr), 0, model.M - 1)
            on_atom = sorted_locs[idx] == y_arr
            probs = model.atom_probs[order][idx]
            out[on_atom] = np.log1p(-model.lam) + np.log(probs[on_atom])
        else:
            on_atom = np.zeros(y_arr.shape, dtype=bool)
        cont = ~on_atom
        if np.any(cont):
            out[cont] = np.log(model.lam) + continuous_log_density(model, y_arr[cont])
    return float(out[0]) if scalar else out


def atom_mask(model: MixtureModel, y: ArrayLike) -> np.ndarray:
    """Exact-match test of values against the atom locations."""
    return np.isin(np.asarray(y, dtype=float), model.atom_locs)


def sample_mixture(model: MixtureModel, n: int, seed) -> np.ndarray:
    """Draw ``n`` values; deterministic given ``seed``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if n == 0:
        return np.empty(0)
    continuous = rng.random(n) < model.lam
    out = np.empty(n)
    nc = int(continuous.sum())
    if nc:
        k = rng.choice(model.K, size=nc, p=model.weights)
        out[continuous] = model.means[k] + model.sds[k] * rng.standard_normal(nc)
    if n - nc:
        m = rng.choice(model.M, size=n - nc, p=model.atom_probs)
        out[~continuous] = model.atom_locs[m]
    return out


def merge(lam_parts: Sequence[float], parts: Sequence[MixtureModel]) -> MixtureModel:
    """Combine mixtures with non-negative total masses ``lam_parts``.

    Components with identical natural parameters and atoms at identical
    locations are pooled. Masses are renormalized to one.
    """
    comp: dict[tuple[float, float], float] = {}
    atoms: dict[float, float] = {}
    for mass, part in zip(lam_parts, parts):
        if mass == 0:
            continue
        for w, a, b in zip(part.weights, part.eta1, part.eta2):
            key = (float(a), float(b))
            comp[key] = comp.get(key, 0.0) + mass * part.lam * w
        for p, g in zip(part.atom_probs, part.atom_locs):
            atoms[float(g)] = atoms.get(float(g), 0.0) + mass * (1.0 - part.lam) * p
    return _from_masses(comp, atoms)


def _from_masses(comp: dict, atoms: dict) -> MixtureModel:
    cont_mass = sum(comp.values())
    atom_mass = sum(atoms.values())
    total = cont_mass + atom_mass
    keys = list(comp)
    locs = sorted(atoms)
    weights = np.array([comp[k] for k in keys]) if keys else np.empty(0)
    probs = np.array([atoms[g] for g in locs]) if locs else np.empty(0)
    lam = cont_mass / total
    if cont_mass > 0:
        weights = weights / cont_mass
    elif keys:
        weights = np.full(len(keys), 1.0 / len(keys))
    if atom_mass > 0:
        probs = probs / atom_mass
    elif locs:
        probs = np.full(len(locs), 1.0 / len(locs))
    if not keys:
        lam = 0.0
    if not locs:
        lam = 1.0
    eta = np.array(keys, dtype=float).reshape(-1, 2)
    return MixtureModel(lam, weights, eta[:, 0], eta[:, 1], probs, locs)
