"""
Brute-force reference computations for the closed forms in :mod:`tukeymiss.core`.

Everything here works from pointwise densities and selection probabilities:
Gaussian log densities come from :mod:`scipy.stats`, the odds of missingness
from log P(R=0|y) - log P(R=1|y), and integrals from a vectorized adaptive
Simpson rule. Nothing calls the closed-form normalizers or tilts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit, logsumexp
from scipy.stats import norm

from .core import CanonicalMechanism, TukeyModel, complete_model
from .expfam import MixtureModel, sample_mixture


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge."""


class NonIntegrableError(ValueError):
    """The integrand does not decay at the ends of the integration range."""


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    span_sd: float = 12.0
    max_subdivisions: int = 2048

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.span_sd < 8:
            raise ValueError("span_sd must be at least 8")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be positive")

    def halved(self) -> "QuadratureConfig":
        return QuadratureConfig(self.abs_tol / 2, self.rel_tol / 2, self.span_sd,
                                2 * self.max_subdivisions)


def adaptive_simpson(f, a: float, b: float, abs_tol: float = 1e-12, rel_tol: float = 1e-10,
                     max_subdivisions: int = 2048, initial_panels: int = 16) -> np.ndarray:
    """Integrate a vectorized, possibly vector-valued ``f`` over [a, b].

    ``f(x)`` maps an array of shape (n,) to shape (n,) or (d, n). All open
    intervals are refined together, one bisection level per pass. An interval
    is accepted once the two-half Simpson estimate agrees with the whole to
    within 15x its share of the tolerance; accepted pieces get the Richardson
    correction.
    """
    def ev(x):
        return np.atleast_2d(np.asarray(f(x), dtype=float))

    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    mid = 0.5 * (lo + hi)
    flo, fmid, fhi = ev(lo), ev(mid), ev(hi)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    rough = np.abs(whole.sum(axis=1)).max()
    tol = max(abs_tol, rel_tol * rough) * (hi - lo) / (b - a)
    total = np.zeros(whole.shape[0])
    n_intervals = lo.size
    while lo.size:
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = ev(lm), ev(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        diff = left + right - whole
        done = np.abs(diff).max(axis=0) <= 15.0 * tol
        total += (left + right + diff / 15.0)[:, done].sum(axis=1)
        keep = ~done
        if not keep.any():
            break
        n_intervals += int(keep.sum())
        if n_intervals > max_subdivisions:
            raise QuadratureError(
                f"adaptive Simpson exceeded {max_subdivisions} subdivisions on [{a}, {b}]")
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        new_mid = np.concatenate([lm[keep], rm[keep]])
        flo = np.concatenate([flo[:, keep], fmid[:, keep]], axis=1)
        fhi = np.concatenate([fmid[:, keep], fhi[:, keep]], axis=1)
        fmid = np.concatenate([flm[:, keep], frm[:, keep]], axis=1)
        whole = np.concatenate([left[:, keep], right[:, keep]], axis=1)
        tol = np.concatenate([tol[keep], tol[keep]]) / 2.0
        mid = new_mid
    return total


# --- pointwise ingredients ------------------------------------------------------

def log_selection(mech: CanonicalMechanism, y):
    """log P(R=1|y) and log P(R=0|y)."""
    lp = mech.alpha0 + mech.alpha1 * y + mech.alpha2 * np.square(y)
    log_sel = math.log(mech.kappa) + log_expit(-lp)
    if mech.kappa == 1.0:
        log_mis = log_expit(lp)
    else:
        log_mis = np.log1p(-np.exp(log_sel))
    return log_sel, log_mis


def log_odds(mech: CanonicalMechanism, y):
    log_sel, log_mis = log_selection(mech, y)
    return log_mis - log_sel


def _observed_density(obs: MixtureModel, y):
    """f_obs(y) under the mixed measure, from scipy's normal pdf."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    on_atom = np.isin(y, obs.atom_locs)
    out = np.zeros(y.shape)
    if obs.K:
        dens = norm.pdf(y[:, None], obs.means, obs.sds) @ obs.weights
        out[~on_atom] = obs.lam * dens[~on_atom]
    for p, g in zip(obs.atom_probs, obs.atom_locs):
        out[y == g] = (1.0 - obs.lam) * p
    return out


def _windows(obs: MixtureModel, mech: CanonicalMechanism, span: float, union: bool = False):
    """Integration range per component: its own window joined with the tilted one.

    The own window is dropped when ``kappa == 1`` and ``union`` is false,
    since the odds then carry no constant term. Where the tilted precision would be non-positive the tilted window is
    skipped and the end-point decay test reports the divergence.
    """
    mu, sd = obs.means, obs.sds
    lo, hi = mu - span * sd, mu + span * sd
    prec = 1.0 / sd**2 - 2.0 * mech.alpha2
    ok = prec > 0
    t_sd = np.where(ok, 1.0 / np.sqrt(np.where(ok, prec, 1.0)), 1.0)
    t_mu = np.where(ok, (mu / sd**2 + mech.alpha1) * t_sd**2, 0.0)
    if union or mech.kappa < 1.0:
        lo = np.where(ok, np.minimum(lo, t_mu - span * t_sd), lo)
        hi = np.where(ok, np.maximum(hi, t_mu + span * t_sd), hi)
    else:
        lo = np.where(ok, t_mu - span * t_sd, lo)
        hi = np.where(ok, t_mu + span * t_sd, hi)
    return lo, hi


def _log_scaled_integrals(log_g, lo, hi, cfg: QuadratureConfig, powers=(0,)):
    """log of int y^j exp(log_g(y)) dy on [lo, hi] for each power, plus the scale.

    The integrand is divided by its maximum on a dense grid before
    integrating, and must fall below ``abs_tol`` at both ends.
    """
    grid = np.linspace(lo, hi, 4097)
    vals = log_g(grid)
    shift = float(np.max(vals))
    if not np.isfinite(shift):
        raise NonIntegrableError("integrand is not finite on the integration range")
    ends = np.exp(np.array([vals[0], vals[-1]]) - shift)
    if np.any(ends > cfg.abs_tol):
        raise NonIntegrableError(
            f"non-integrable configuration: integrand does not decay on [{lo:.4g}, {hi:.4g}]")

    def f(y):
        base = np.exp(log_g(y) - shift)
        return np.stack([base * y**j for j in powers])

    vals = adaptive_simpson(f, lo, hi, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions)
    return vals, shift


# --- public oracle operations ---------------------------------------------------

def q_quadrature(obs: MixtureModel, mech: CanonicalMechanism,
                 cfg: QuadratureConfig | None = None) -> float:
    """Q = 1 / (1 + int odds(y) f_obs(y) dy), atoms summed exactly."""
    cfg = cfg or QuadratureConfig()
    log_terms = []
    if obs.K and obs.lam > 0:
        lo, hi = _windows(obs, mech, cfg.span_sd)
        for k in range(obs.K):
            if obs.weights[k] == 0:
                continue
            mu, sd = obs.means[k], obs.sds[k]

            def log_g(y, mu=mu, sd=sd):
                return norm.logpdf(y, mu, sd) + log_odds(mech, y)

            (val,), shift = _log_scaled_integrals(log_g, lo[k], hi[k], cfg)
            log_terms.append(math.log(obs.lam * obs.weights[k]) + shift + math.log(val))
    if obs.M and obs.lam < 1:
        with np.errstate(divide="ignore"):
            log_terms.extend(np.log((1.0 - obs.lam) * obs.atom_probs)
                             + log_odds(mech, obs.atom_locs))
    log_int = logsumexp(log_terms)
    return float(expit(-log_int))


def missing_density_pointwise(obs: MixtureModel, mech: CanonicalMechanism, q: float, y):
    """(q / (1 - q)) * odds(y) * f_obs(y), pointwise (atom mass at atom locations)."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie in (0, 1)")
    y_arr = np.asarray(y, dtype=float)
    dens = _observed_density(obs, y_arr)
    with np.errstate(over="ignore"):
        out = q / (1.0 - q) * np.exp(log_odds(mech, np.atleast_1d(y_arr))) * dens
    return float(out[0]) if y_arr.ndim == 0 else out


def complete_density_pointwise(model: TukeyModel, y):
    """q * f_obs(y) / P(R=1|y) = q f_obs + (1 - q) f_mis."""
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    log_sel, _ = log_selection(model.mech, y_arr)
    return model.q * _observed_density(model.obs, y_arr) * np.exp(-log_sel)


def moments_quadrature(model: TukeyModel, cfg: QuadratureConfig | None = None):
    """Complete-data (mean, sd) by integrating q f_obs(y) / P(R=1|y)."""
    cfg = cfg or QuadratureConfig()
    obs, mech, q = model.obs, model.mech, model.q
    m = np.zeros(3)
    if obs.K and obs.lam > 0:
        lo, hi = _windows(obs, mech, cfg.span_sd, union=True)
        for k in range(obs.K):
            mu, sd = obs.means[k], obs.sds[k]

            def log_g(y, mu=mu, sd=sd):
                return norm.logpdf(y, mu, sd) - log_selection(mech, y)[0]

            vals, shift = _log_scaled_integrals(log_g, lo[k], hi[k], cfg, powers=(0, 1, 2))
            m += q * obs.lam * obs.weights[k] * math.exp(shift) * vals
    if obs.M and obs.lam < 1:
        g = obs.atom_locs
        mass = q * (1.0 - obs.lam) * obs.atom_probs * np.exp(-log_selection(mech, g)[0])
        m += np.array([mass.sum(), mass @ g, mass @ g**2])
    mean = m[1] / m[0]
    return float(mean), float(math.sqrt(m[2] / m[0] - mean**2))


def mc_observed_fraction(model: TukeyModel, n: int, seed) -> float:
    """Simulate (y, r) from the joint and return the fraction observed."""
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    y = sample_mixture(complete_model(model), n, rng)
    p = np.exp(log_selection(model.mech, y)[0])
    return float(np.mean(rng.random(n) < p))
