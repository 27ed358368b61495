"""
Line amplitudes and the sign of det(A)
======================================

In-plane sweeps of the four low-frequency ESR amplitudes for a tensor with
det > 0 and for the same tensor with A_yy negated.
"""

# %%
import numpy as np

from nvc13 import SOLUTION_1, HyperfineTensor, MicrowaveField, SpinSystemParams
from nvc13.spectra import amplitude_ratio_profile
from nvc13.tensor import classify_det_sign, det_sign

sys = SpinSystemParams()
b_mT = 63.3 / sys.gamma_e
mw = MicrowaveField.along([1.0, 0.0, 0.0], sys)
phi = np.arange(0.0, 180.0, 2.0)

negated = HyperfineTensor(SOLUTION_1.a_xx, -SOLUTION_1.a_yy, SOLUTION_1.a_zz, SOLUTION_1.a_xz)

# %%
for name, a in (("det > 0", SOLUTION_1), ("A_yy negated", negated)):
    prof = amplitude_ratio_profile(sys, a, 90.0, mw, phi, b_mT)
    verdict = classify_det_sign(prof)
    print(f"{name}: det = {det_sign(a)[0]:.3e} MHz^3, verdict {verdict.verdict}")
    print("  phi      I1      I2      I3      I4")
    for p, row in list(zip(prof.phi, prof.intensities))[::9]:
        print(f"  {p:4.0f} " + " ".join(f"{v:7.4f}" for v in row))

# %% I1 and I4 stay in phase for det > 0; the weak pair peaks 90 degrees away
i = amplitude_ratio_profile(sys, SOLUTION_1, 90.0, mw, phi, b_mT).intensities
print("corr(I1, I4) =", round(float(np.corrcoef(i[:, 0], i[:, 3])[0, 1]), 4))
print("peak of I1 at", phi[np.argmax(i[:, 0])], "deg, peak of I2 at", phi[np.argmax(i[:, 1])], "deg")
