"""
Transition frequencies and amplitudes of the NV/13C system.

Eight ESR lines connect the two mS = 0 states with the four remaining
states; the zero-quantum (ZQ) line is the nuclear transition inside the
mS = 0 pair. Amplitudes are squared matrix elements of the drive operator
``n_mw . (S + (gamma_n / gamma_e) I)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .spin import (
    I_OPS,
    S_OPS,
    FieldOrientation,
    LabelError,
    SpinSystemParams,
    build_hamiltonian,
    eigensystem,
    spin_matrices,
)

ESR = "esr"
ZQ = "zq"

# line frequencies closer than this are treated as an ordering ambiguity
CROSSING_TOL = 1e-3


@dataclass(frozen=True)
class MicrowaveField:
    """Linearly polarised drive along ``direction`` (unit vector, NV frame)."""

    direction: tuple
    nuclear_ratio: float = 0.0

    def __post_init__(self):
        n = np.asarray(self.direction, dtype=float)
        if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > 1e-10:
            raise ValueError("microwave direction must be a unit 3-vector")
        object.__setattr__(self, "direction", tuple(float(x) for x in n))

    @classmethod
    def along(cls, vector, sys=None):
        """Normalise ``vector``; the nuclear drive factor is gamma_n/gamma_e of ``sys``."""
        n = np.asarray(vector, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("microwave direction must be non-zero")
        ratio = 0.0 if sys is None else sys.gamma_n / sys.gamma_e
        return cls(tuple(n / norm), ratio)

    @classmethod
    def from_angles(cls, theta, phi, sys=None):
        th, ph = np.radians(theta), np.radians(phi)
        return cls.along(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], sys
        )

    @property
    def operator(self):
        n = self.direction
        return sum(n[k] * (S_OPS[k] + self.nuclear_ratio * I_OPS[k]) for k in range(3))

    def reflected(self):
        """Mirror image through the xz-plane (y -> -y)."""
        x, y, z = self.direction
        return MicrowaveField((x, -y, z), self.nuclear_ratio)


@dataclass(frozen=True)
class SpectralLine:
    freq: float
    amplitude: float
    initial: tuple
    final: tuple
    kind: str = ESR


def _zero_pair(levels):
    pair = levels.states(0)
    if len(pair) != 2 or any(levels.ambiguous[k] for k in pair):
        raise LabelError("the two mS = 0 states are not unambiguously identified")
    return pair


def _matrix_element(levels, op, i, f):
    return levels.vectors[:, f].conj() @ op @ levels.vectors[:, i]


def esr_lines(levels, mw):
    """The 8 ESR lines sorted by frequency.

    Requires the mS = 0 pair to be unambiguous. The upper states may be
    mixtures of mS = +1 and -1 (e.g. for fields in the xy-plane); their
    labels are carried through as assigned.
    """
    pair = _zero_pair(levels)
    op = mw.operator
    upper = [k for k in range(len(levels.energies)) if k not in pair]
    lines = []
    for i in pair:
        for f in upper:
            lines.append(
                SpectralLine(
                    freq=float(levels.energies[f] - levels.energies[i]),
                    amplitude=float(abs(_matrix_element(levels, op, i, f)) ** 2),
                    initial=(levels.ms[i], levels.branch[i]),
                    final=(levels.ms[f], levels.branch[f]),
                    kind=ESR,
                )
            )
    lines.sort(key=lambda line: line.freq)
    return lines


def zq_frequency_exact(levels):
    """|E(mS=0, branch 1) - E(mS=0, branch 0)| from the exact eigenvalues."""
    i, j = _zero_pair(levels)
    return float(abs(levels.energies[j] - levels.energies[i]))


def zq_line(levels, mw):
    i, j = _zero_pair(levels)
    return SpectralLine(
        freq=zq_frequency_exact(levels),
        amplitude=float(abs(_matrix_element(levels, mw.operator, i, j)) ** 2),
        initial=(0, 0),
        final=(0, 1),
        kind=ZQ,
    )


def spectrum(sys, a, field, mw):
    """8 ESR lines followed by the ZQ line for one field orientation."""
    levels = eigensystem(build_hamiltonian(sys, a, field))
    return esr_lines(levels, mw) + [zq_line(levels, mw)]


def zq_frequency_perturbative(sys, a, field):
    """Second-order ZQ frequency

        2 |gamma_e B sin(theta)| / D * (sqrt(A_xx^2 + A_xz^2) cos^2(phi) + |A_yy| sin^2(phi))
    """
    if sys.d_zfs == 0:
        raise ValueError("the perturbative formula needs D > 0")
    th, ph = np.radians(field.theta), np.radians(field.phi)
    prefactor = 2.0 * abs(sys.gamma_e * field.b_mag * np.sin(th)) / sys.d_zfs
    return float(
        prefactor
        * (np.hypot(a.a_xx, a.a_xz) * np.cos(ph) ** 2 + abs(a.a_yy) * np.sin(ph) ** 2)
    )


@dataclass(frozen=True)
class RabiRatio:
    """Ratio of the two moments |<upper|V|0,b>| reaching one upper state.

    ``ratio >= 1`` always; ``inverted`` is True when the branch-1 moment
    is the larger one. ``ratio`` is ``inf`` when the smaller moment vanishes.
    """

    ratio: float
    inverted: bool
    moments: tuple


def rabi_ratio(levels, mw, upper):
    """Rabi-frequency ratio of the two ESR lines sharing the upper state ``upper``.

    ``upper`` is a (mS, branch) label with mS = +1 or -1; the two lines
    differ in frequency by exactly the ZQ frequency.
    """
    pair = _zero_pair(levels)
    if upper[0] == 0:
        raise ValueError("upper state must have mS = +1 or -1")
    f = levels.index(*upper)
    op = mw.operator
    m0, m1 = (abs(_matrix_element(levels, op, i, f)) for i in pair)
    big, small = max(m0, m1), min(m0, m1)
    ratio = np.inf if small <= 1e-15 * max(big, 1.0) else big / small
    return RabiRatio(float(ratio), bool(m1 > m0), (float(m0), float(m1)))


@dataclass(frozen=True)
class AmplitudeProfile:
    """Amplitudes I1..I4 of the four lowest ESR lines over a phi sweep.

    ``intensities`` has shape (n_phi, 4) with columns in ascending
    frequency; ``crossing[k]`` flags grid points where two of those lines
    are closer than ``CROSSING_TOL`` MHz, so the ordering is ill-defined.
    """

    theta: float
    phi: np.ndarray
    freqs: np.ndarray
    intensities: np.ndarray
    crossing: np.ndarray

    @property
    def ratio(self):
        i = self.intensities
        with np.errstate(divide="ignore", invalid="ignore"):
            return (i[:, 0] + i[:, 3]) / (i[:, 1] + i[:, 2])


def amplitude_ratio_profile(sys, a, theta, mw, phi_grid, b_mag):
    """Sweep the field azimuth at fixed polar angle and track the low-frequency lines."""
    phi_grid = np.asarray(phi_grid, dtype=float)
    freqs = np.empty((phi_grid.size, 4))
    amps = np.empty((phi_grid.size, 4))
    crossing = np.zeros(phi_grid.size, dtype=bool)
    for n, phi in enumerate(phi_grid):
        levels = eigensystem(build_hamiltonian(sys, a, FieldOrientation(b_mag, theta, phi)))
        # with hyperfine coupling these are the lines below D
        low = esr_lines(levels, mw)[:4]
        freqs[n] = [line.freq for line in low]
        amps[n] = [line.amplitude for line in low]
        crossing[n] = np.any(np.diff(freqs[n]) < CROSSING_TOL)
    return AmplitudeProfile(float(theta), phi_grid, freqs, amps, crossing)


@dataclass
class SyntheticDataset:
    """Noisy line lists for a set of orientations.

    ``records[k]`` is ``(orientation, [(kind, freq, sigma, amplitude), ...])``.
    """

    records: list
    seed: int
    esr_linewidth: float
    zq_linewidth: float
    generator: dict = field(default_factory=dict)

    @property
    def orientations(self):
        return [o for o, _ in self.records]


#: recorded uncertainty for noiseless lines (zero linewidth)
NOISELESS_SIGMA = 1e-6


def synth_dataset(sys, a, orientations, mw, linewidths, noise_seed):
    """Exact spectra plus Gaussian centre noise with sigma = linewidth / 2.

    Parameters
    ----------
    linewidths : (float, float)
        ESR and ZQ linewidths in MHz. Zero means noiseless; the lines then
        carry ``NOISELESS_SIGMA`` as uncertainty.
    """
    orientations = list(orientations)
    if not orientations:
        raise ValueError("no orientations given")
    esr_w, zq_w = (float(w) for w in linewidths)
    if esr_w < 0 or zq_w < 0:
        raise ValueError("linewidths must be non-negative")
    rng = np.random.default_rng(noise_seed)
    records = []
    for orient in orientations:
        lines = spectrum(sys, a, orient, mw)
        out = []
        for line in lines:
            sigma = (esr_w if line.kind == ESR else zq_w) / 2.0
            noise = rng.normal(0.0, sigma) if sigma > 0 else 0.0
            out.append(
                (line.kind, line.freq + noise, sigma or NOISELESS_SIGMA, line.amplitude)
            )
        records.append((orient, out))
    return SyntheticDataset(
        records,
        noise_seed,
        esr_w,
        zq_w,
        generator={
            "a_xx": a.a_xx,
            "a_yy": a.a_yy,
            "a_zz": a.a_zz,
            "a_xz": a.a_xz,
            "d_zfs": sys.d_zfs,
            "gamma_e": sys.gamma_e,
            "gamma_n": sys.gamma_n,
            "mw_direction": list(mw.direction),
        },
    )


def orientation_grid(b_mag, thetas=(20.0, 55.0, 84.5), phis=(0.0, 70.0, 150.0, 250.0)):
    """NV-frame field orientations on a theta x phi grid (12 by default)."""
    return [FieldOrientation(b_mag, t, p) for t in thetas for p in phis]


def bare_esr_frequencies(sys, field):
    """The two ESR frequencies of an NV centre without 13C (3-level model)."""
    s = spin_matrices(1)
    b = field.vector
    h = sys.d_zfs * s[2] @ s[2] + sys.gamma_e * sum(b[k] * s[k] for k in range(3))
    energies, vecs = np.linalg.eigh(h)
    zero = int(np.argmax(np.abs(vecs[1]) ** 2))
    return sorted(float(energies[k] - energies[zero]) for k in range(3) if k != zero)
