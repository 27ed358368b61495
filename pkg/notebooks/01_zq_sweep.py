"""
Zero-quantum frequency versus field azimuth
===========================================

Exact diagonalisation against the second-order formula for the default
first-shell tensor, then a linear fit of the ZQ splitting in cos^2 / sin^2.
"""

# %%
import numpy as np

from nvc13 import SOLUTION_1, FieldOrientation, SpinSystemParams
from nvc13.fitting import fit_zq_linear
from nvc13.spectra import zq_frequency_exact, zq_frequency_perturbative
from nvc13.spin import solve

sys = SpinSystemParams()
b_mT = 63.3 / sys.gamma_e
theta = 84.5

# %% sweep the azimuth at fixed polar angle
phi = np.arange(0.0, 181.0, 10.0)
exact = np.array([zq_frequency_exact(solve(sys, SOLUTION_1, FieldOrientation(b_mT, theta, p))) for p in phi])
pert = np.array([zq_frequency_perturbative(sys, SOLUTION_1, FieldOrientation(b_mT, theta, p)) for p in phi])

print(" phi   exact   second-order   rel. diff")
for p, e, q in zip(phi, exact, pert):
    print(f"{p:5.0f} {e:8.3f} {q:10.3f} {abs(q - e) / e:12.4f}")

# %% the splitting is linear in (cos^2 phi, sin^2 phi)
fit = fit_zq_linear(phi, exact)
print(f"kappa1 = {fit.kappa1:.3f} MHz, kappa2 = {fit.kappa2:.3f} MHz, ratio {fit.ratio:.3f}")

# %% the same coefficients from the perturbative curve differ slightly
fit_p = fit_zq_linear(phi, pert)
print(f"second order: kappa1 = {fit_p.kappa1:.3f}, kappa2 = {fit_p.kappa2:.3f}, ratio {fit_p.ratio:.3f}")
