"""
Closed forms for the missing-data model, checked against brute force.

We take the semicontinuous observed-data model (three Normal components plus
nine point masses) and a quadratic-logistic selection curve peaking at y = -2.
Everything downstream of "observed model + odds of missingness" is available
in closed form; here we compare each piece with direct numerical integration.

Run:  python demos/01_closed_forms.py
"""

import numpy as np

from tukeymiss import (
    MixtureModel,
    QuadraticLogit,
    TukeyModel,
    canonicalize,
    complete_moments,
    missing_model,
    q_closed_form,
    solve_intercept,
)
from tukeymiss.core import spec_intercept, tilt_mass
from tukeymiss.oracle import moments_quadrature, q_quadrature

obs = MixtureModel.from_moments(
    0.8, [0.3, 0.4, 0.3], [-2.0, 0.0, 3.0], [1.0, 1.0, 1.0],
    np.full(9, 1 / 9), np.arange(-4.0, 5.0))

# selection probability 1 / (1 + exp(b0 + b2 (y - b1)^2)); b0 is left open
spec = QuadraticLogit(None, -2.0, 0.06)
mech = canonicalize(spec)
print("canonical slope terms: alpha1 = %.4f, alpha2 = %.4f" % (mech.alpha1, mech.alpha2))
print("tilt mass U = %.6f" % tilt_mass(obs, mech))

# choose the intercept so that half the data are observed
a0 = solve_intercept(obs, mech, 0.5)
print("intercept for Q = 0.5: alpha0 = %.6f  (b0 = %.6f)" % (a0, spec_intercept(spec, a0)))
mech = mech.with_intercept(a0)
print("  closed form Q  = %.15f" % q_closed_form(obs, mech))
print("  quadrature Q   = %.15f" % q_quadrature(obs, mech))

# the missing-data model: each Normal component is shifted and narrowed,
# each atom is reweighted by its odds of missingness
fmis = missing_model(obs, mech)
for w, m, s in zip(fmis.weights, fmis.means, fmis.sds):
    print("  missing component: weight %.4f  mean %.4f  sd %.4f" % (w, m, s))
print("  missing atom masses:", np.round(fmis.atom_probs, 4))

model = TukeyModel(obs, mech, 0.5)
print("complete-data (mean, sd) closed form: (%.10f, %.10f)" % complete_moments(model))
print("complete-data (mean, sd) quadrature:  (%.10f, %.10f)" % moments_quadrature(model))
