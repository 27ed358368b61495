"""
Full tensor fit on the bundled synthetic dataset
================================================

Load the 12-orientation dataset shipped with the package, fit the four
tensor components and list the spectrally equivalent candidates.
"""

# %%
import numpy as np

from nvc13 import HyperfineTensor, SpinSystemParams
from nvc13.fitting import Constraints, fit_hyperfine_full, fit_lorentzian
from nvc13.io import data_path, load_dataset
from nvc13.tensor import classify_ratio_curve, pas_decompose

ds = load_dataset(data_path("sol1"))
print(ds.comment)
print(len(ds.orientations), "orientations,", len(ds.lines), "lines,", len(ds.ratios), "ratio points")

# %% the amplitude-ratio curve fixes the sign of det(A)
phi = np.array([r.phi_deg for r in ds.ratios])
ratio = np.array([r.ratio for r in ds.ratios])
print("ratio curve:", classify_ratio_curve(phi, ratio).verdict)
lor = fit_lorentzian(phi, ratio, np.array([r.sigma for r in ds.ratios]))
print(f"Lorentzian a = {lor.a:.1f}, b = {lor.b:.2f} deg, phi1 = {lor.phi1:.2f} deg")

# %% multi-start fit with det > 0 and the Rabi-ratio bound
ff = fit_hyperfine_full(
    ds, HyperfineTensor(150.0, 100.0, 100.0, 10.0), SpinSystemParams(), Constraints(1, 0.3), n_starts=4
)
for c in ff.candidates:
    vals = ", ".join(f"{v:8.2f}" for v in c.tensor.as_array())
    errs = ", ".join(f"{e:.2f}" for e in c.stderr)
    print(f"{c.transform:9s} ({vals}) +- ({errs})  chi {c.chi_rms:.3f}")

# %% principal values of the best candidate
pas = pas_decompose(ff.candidates[0].tensor)
print("principal values", np.round(pas.values, 2), "zeta", round(pas.zeta, 2))
