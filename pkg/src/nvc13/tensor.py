"""
Principal-axis analysis of the mirror-symmetric hyperfine tensor.

The mirror plane fixes the NV y-axis as a principal axis, so the
decomposition reduces to the 2x2 (x, z) block. ``zeta`` is the angle from
the NV z-axis to the in-plane principal axis carrying the larger-magnitude
eigenvalue, measured as a rotation about y.
"""

from dataclasses import dataclass

import numpy as np

from .spin import (
    FieldOrientation,
    HyperfineTensor,
    SpinSystemParams,
    build_hamiltonian,
)

#: tetrahedral angle; representatives within 5 degrees of it are marked preferred
TETRAHEDRAL_ANGLE = 109.5


class EquivalenceError(RuntimeError):
    """A generated candidate failed the spectral-equivalence check."""


@dataclass(frozen=True)
class PasDecomposition:
    """Principal values in the mirror-adapted frame.

    ``a_yy_bar`` lies along NV y; ``a_zz_bar`` is the larger-magnitude
    in-plane value at ``zeta`` from NV z and ``a_xx_bar`` the other one.
    """

    a_xx_bar: float
    a_yy_bar: float
    a_zz_bar: float
    zeta: float
    equivalent_angles: tuple

    @property
    def values(self):
        return np.array([self.a_xx_bar, self.a_yy_bar, self.a_zz_bar])

    @property
    def sorted_values(self):
        """Principal values ordered by increasing magnitude."""
        v = self.values
        return v[np.argsort(np.abs(v), kind="stable")]

    @property
    def magnitude_ordered(self):
        m = np.abs(self.values)
        return bool(m[0] <= m[1] <= m[2])

    @property
    def preferred_angle(self):
        """Member of the equivalent set closest to the tetrahedral angle, if within 5 degrees."""
        angles = np.array(self.equivalent_angles) % 360.0
        dev = np.abs(angles - TETRAHEDRAL_ANGLE)
        k = int(np.argmin(dev))
        return float(angles[k]) if dev[k] <= 5.0 else None


def equivalent_angles(zeta):
    """{zeta, -zeta, 180 - zeta, 180 + zeta} reduced to [0, 360)."""
    return tuple(float(x % 360.0) for x in (zeta, -zeta, 180.0 - zeta, 180.0 + zeta))


def _eig2(a, b, c):
    """Closed-form eigensystem of [[a, b], [b, c]] -> (values, angle of first vector)."""
    mean = 0.5 * (a + c)
    half = np.hypot(0.5 * (a - c), b)
    lo, hi = mean - half, mean + half
    # eigenvector of hi: angle psi from the first axis, tan(2 psi) = 2b / (a - c)
    psi = 0.5 * np.arctan2(2.0 * b, a - c)
    return lo, hi, psi


def pas_decompose(a):
    """Diagonalise the (x, z) block and locate the major in-plane axis.

    Examples
    --------
    >>> p = pas_decompose(HyperfineTensor(189.3, 128.4, 128.9, -24.1))
    >>> round(p.zeta, 1), np.round(p.values, 1).tolist()
    (109.3, [120.5, 128.4, 197.8])
    """
    # work in (z, x) order so the angle is measured from NV z towards NV x
    lo, hi, psi = _eig2(a.a_zz, a.a_xz, a.a_xx)
    # psi points at ``hi``; the perpendicular axis carries ``lo``
    if abs(hi) >= abs(lo):
        major, minor, angle = hi, lo, psi
    else:
        major, minor, angle = lo, hi, psi + 0.5 * np.pi
    zeta = float(np.degrees(angle) % 180.0)
    return PasDecomposition(
        float(minor), float(a.a_yy), float(major), zeta, equivalent_angles(zeta)
    )


def from_pas(values, zeta):
    """Rotate diag(values) by ``zeta`` about NV y; values are (xx, yy, zz) in the PAS."""
    axx, ayy, azz = (float(v) for v in values)
    z = np.radians(zeta)
    s, c = np.sin(z), np.cos(z)
    return HyperfineTensor(
        a_xx=azz * s * s + axx * c * c,
        a_yy=ayy,
        a_zz=azz * c * c + axx * s * s,
        a_xz=(azz - axx) * s * c,
    )


def det_sign(a):
    """Determinant a_yy (a_xx a_zz - a_xz^2) in MHz^3 and its sign."""
    det = a.a_yy * (a.a_xx * a.a_zz - a.a_xz**2)
    return det, int(np.sign(det))


# sign patterns on (xx, yy, zz) in the PAS with product +1: pi rotations of the
# nuclear spin about each principal axis, which leave the spectrum unchanged
# when the nuclear Zeeman term is dropped
SIGN_PATTERNS = {
    "identity": (1, 1, 1),
    "pi_y": (-1, 1, -1),
    "pi_x": (1, -1, -1),
    "pi_z": (-1, -1, 1),
}


def _random_fields(n, b_mag, rng):
    v = rng.normal(size=(n, 3))
    return [FieldOrientation.from_vector(b_mag * x / np.linalg.norm(x)) for x in v]


def spectral_deviation(a, b, sys, fields):
    """Largest eigenvalue difference (MHz) between two tensors over ``fields``."""
    dev = 0.0
    for f in fields:
        ea = np.linalg.eigvalsh(build_hamiltonian(sys, a, f))
        eb = np.linalg.eigvalsh(build_hamiltonian(sys, b, f))
        dev = max(dev, float(np.max(np.abs(ea - eb))))
    return dev


@dataclass(frozen=True)
class EquivalentSolutions:
    """Four spectrally indistinguishable tensors.

    ``tensors`` follow ``names``; the sign of ``a_xz`` is free in addition
    (``xz_sign_free``), corresponding to a pi rotation of the frame about z.
    ``max_deviation`` is the worst eigenvalue mismatch found in the check.
    """

    tensors: tuple
    names: tuple
    max_deviation: float
    xz_sign_free: bool = True

    def __iter__(self):
        return iter(self.tensors)

    def __len__(self):
        return len(self.tensors)

    def __getitem__(self, k):
        return self.tensors[k]


def equivalent_solutions(a, sys=None, n_check=20, seed=0, b_mag=None, tol=1e-6):
    """Enumerate and verify the four sign solutions sharing |principal values|.

    Every candidate is compared with ``a`` by brute-force diagonalisation
    at ``n_check`` random field orientations with the nuclear Zeeman term
    switched off. A candidate deviating by more than ``tol`` MHz raises
    :class:`EquivalenceError`.
    """
    sys = (sys or SpinSystemParams()).without_nuclear_zeeman()
    if b_mag is None:
        b_mag = 63.3 / sys.gamma_e
    pas = pas_decompose(a)
    rng = np.random.default_rng(seed)
    fields = _random_fields(n_check, b_mag, rng)
    out, worst = [], 0.0
    for name, signs in SIGN_PATTERNS.items():
        cand = from_pas(pas.values * np.array(signs), pas.zeta)
        dev = spectral_deviation(a, cand, sys, fields)
        if dev > tol:
            raise EquivalenceError(f"candidate {name} deviates by {dev:.3g} MHz")
        worst = max(worst, dev)
        out.append(cand)
    return EquivalentSolutions(tuple(out), tuple(SIGN_PATTERNS), worst)


def check_equivalence(a, candidate, sys=None, n_check=20, seed=0, b_mag=None):
    """Spectral deviation (MHz) of ``candidate`` from ``a`` with gamma_n = 0."""
    sys = (sys or SpinSystemParams()).without_nuclear_zeeman()
    if b_mag is None:
        b_mag = 63.3 / sys.gamma_e
    fields = _random_fields(n_check, b_mag, np.random.default_rng(seed))
    return spectral_deviation(a, candidate, sys, fields)


POSITIVE = "positive"
NEGATIVE = "negative"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DetVerdict:
    verdict: str
    peak_to_mean: float
    strong_modulation: float
    correlation_14: float
    weak_fraction: float
    peak_to_trough: float = np.nan


def classify_det_sign(profile, threshold=3.0, flat=1.5, weak=0.5):
    """Decide the sign of det(A) from an in-plane amplitude profile.

    det > 0 shows a strongly peaked (I1+I4)/(I2+I3) with I1 and I4 in
    phase; det < 0 leaves the strong lines I1, I4 nearly flat while I2, I3
    stay weak. The second test uses the modulation of I1+I4 rather than
    the ratio itself, which diverges wherever I2 + I3 has a node. If the
    line ordering is ambiguous over most of the sweep the verdict is
    inconclusive.

    Parameters
    ----------
    threshold : float
        Minimum max/mean of the ratio curve for a det > 0 verdict.
    flat : float
        Maximum max/min of I1+I4 for a det < 0 verdict.
    weak : float
        Maximum mean(I2+I3)/mean(I1+I4) for a det < 0 verdict.
    """
    phi = np.sort(np.asarray(profile.phi, dtype=float))
    # a grid 0, 5, ..., 175 covers the full period
    if phi.size < 4 or np.ptp(phi) + np.median(np.diff(phi)) < 180.0 - 1e-9:
        raise ValueError("profile must span at least 180 degrees of phi")
    crossing = np.asarray(getattr(profile, "crossing", np.zeros(phi.size, dtype=bool)))
    if crossing.mean() > 0.5:
        # degenerate lines: I1..I4 are not defined
        return DetVerdict(INCONCLUSIVE, np.nan, np.nan, np.nan, np.nan)
    i = np.asarray(profile.intensities)
    strong, weak_sum = i[:, 0] + i[:, 3], i[:, 1] + i[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = strong / weak_sum
        finite = ratio[np.isfinite(ratio)]
        peak_to_mean = float(finite.max() / finite.mean()) if finite.size else np.inf
        if finite.size < ratio.size:
            peak_to_mean = np.inf
        modulation = float(strong.max() / strong.min()) if strong.min() > 0 else np.inf
    if np.std(i[:, 0]) > 0 and np.std(i[:, 3]) > 0:
        corr = float(np.corrcoef(i[:, 0], i[:, 3])[0, 1])
    else:
        corr = 0.0
    weak_fraction = float(weak_sum.mean() / strong.mean()) if strong.mean() > 0 else np.inf

    if modulation <= flat and weak_fraction <= weak:
        verdict = NEGATIVE
    elif peak_to_mean > threshold and corr > 0 and modulation > flat:
        verdict = POSITIVE
    else:
        verdict = INCONCLUSIVE
    return DetVerdict(verdict, peak_to_mean, modulation, corr, weak_fraction)


def classify_ratio_curve(phi, ratio, threshold=3.0):
    """det(A) verdict from a measured (I1+I4)/(I2+I3) curve alone.

    A curve whose peak-to-trough ratio exceeds ``threshold`` indicates
    det > 0. Without the individual intensities a flat curve cannot be told
    apart from poor data, so the result is then inconclusive rather than
    negative.
    """
    phi = np.asarray(phi, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    if phi.size < 4:
        raise ValueError("need at least 4 ratio points")
    finite = ratio[np.isfinite(ratio) & (ratio > 0)]
    if finite.size < 4:
        raise ValueError("need at least 4 finite positive ratios")
    peak_to_trough = float(finite.max() / finite.min())
    verdict = POSITIVE if peak_to_trough > threshold else INCONCLUSIVE
    return DetVerdict(verdict, float(finite.max() / finite.mean()), np.nan, np.nan, np.nan, peak_to_trough)
