"""
Spin operators, the NV/13C Hamiltonian and its labelled eigensystem.

Basis order is fixed as (mS = +1, 0, -1) x (mI = +1/2, -1/2), i.e. index
``2 * electron_index + nuclear_index``. Energies are in MHz (h = 1), fields
in mT and angles in degrees at every public interface.
"""

from dataclasses import dataclass, field

import numpy as np

#: gamma_e in MHz/mT (28024.95 MHz/T), entered with a + sign as in H = ... + gamma_e B.S
GAMMA_E = 28.02495
#: 13C gyromagnetic ratio in MHz/mT (10.7084 MHz/T)
GAMMA_C13 = 0.0107084
#: zero-field splitting in MHz
D_ZFS = 2870.2

LABEL_THRESHOLD = 0.6

MS_VALUES = (1, 0, -1)


class LabelError(ValueError):
    """Raised when eigenstates cannot be assigned electron quantum numbers."""


def spin_matrices(spin):
    """Return (Jx, Jy, Jz) for spin 1/2 or spin 1 with m ordered descending.

    Examples
    --------
    >>> jx, jy, jz = spin_matrices(0.5)
    >>> np.diag(jz).real
    array([ 0.5, -0.5])
    """
    if spin not in (0.5, 1):
        raise ValueError(f"unsupported spin value {spin!r}; expected 1/2 or 1")
    m = np.arange(spin, -spin - 1, -1.0)
    # <m+1|J+|m> = sqrt(j(j+1) - m(m+1))
    jp = np.diag(np.sqrt(spin * (spin + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    jm = jp.conj().T
    jx = 0.5 * (jp + jm)
    jy = -0.5j * (jp - jm)
    jz = np.diag(m).astype(complex)
    return jx, jy, jz


_S1 = spin_matrices(1)
_I2 = spin_matrices(0.5)
#: electron operators on the 6-dim product space
S_OPS = tuple(np.kron(s, np.eye(2)) for s in _S1)
#: nuclear operators on the 6-dim product space
I_OPS = tuple(np.kron(np.eye(3), i) for i in _I2)
SZ2 = S_OPS[2] @ S_OPS[2]


@dataclass(frozen=True)
class SpinSystemParams:
    d_zfs: float = D_ZFS
    gamma_e: float = GAMMA_E
    gamma_n: float = GAMMA_C13

    def __post_init__(self):
        if not self.d_zfs >= 0:
            raise ValueError("d_zfs must be non-negative")
        if not self.gamma_e > 0:
            raise ValueError("gamma_e must be positive")
        if abs(self.gamma_n) >= 1e-3 * self.gamma_e:
            raise ValueError("|gamma_n| must be below 1e-3 * gamma_e")

    def without_nuclear_zeeman(self):
        return SpinSystemParams(self.d_zfs, self.gamma_e, 0.0)


@dataclass(frozen=True)
class HyperfineTensor:
    """Mirror-symmetric hyperfine tensor in the NV frame (MHz)."""

    a_xx: float
    a_yy: float
    a_zz: float
    a_xz: float

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[1, 1], m[2, 2], 0.5 * (m[0, 2] + m[2, 0]))

    @property
    def matrix(self):
        return np.array(
            [
                [self.a_xx, 0.0, self.a_xz],
                [0.0, self.a_yy, 0.0],
                [self.a_xz, 0.0, self.a_zz],
            ]
        )

    def as_array(self):
        return np.array([self.a_xx, self.a_yy, self.a_zz, self.a_xz])

    def __neg__(self):
        return HyperfineTensor(-self.a_xx, -self.a_yy, -self.a_zz, -self.a_xz)


ZERO_TENSOR = HyperfineTensor(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FieldOrientation:
    """Static field: magnitude in mT, polar/azimuthal angles in degrees (NV frame)."""

    b_mag: float
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.b_mag < 0:
            raise ValueError("b_mag must be non-negative")

    @classmethod
    def from_vector(cls, b):
        b = np.asarray(b, dtype=float)
        mag = float(np.linalg.norm(b))
        if mag == 0.0:
            return cls(0.0, 0.0, 0.0)
        theta = np.degrees(np.arccos(np.clip(b[2] / mag, -1.0, 1.0)))
        phi = np.degrees(np.arctan2(b[1], b[0])) % 360.0
        return cls(mag, float(theta), float(phi))

    @property
    def unit(self):
        th, ph = np.radians(self.theta), np.radians(self.phi)
        return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])

    @property
    def vector(self):
        return self.b_mag * self.unit


def hyperfine_operator(a):
    """Hyperfine coupling S.A.I restricted to the mirror-symmetric components."""
    sx, sy, sz = S_OPS
    ix, iy, iz = I_OPS
    return (
        a.a_zz * (sz @ iz)
        + a.a_xx * (sx @ ix)
        + a.a_yy * (sy @ iy)
        + a.a_xz * (sx @ iz + sz @ ix)
    )


def zeeman_operator(sys, b_vec):
    """Electron plus nuclear Zeeman term for a field vector in mT."""
    return sum(
        b_vec[k] * (sys.gamma_e * S_OPS[k] + sys.gamma_n * I_OPS[k]) for k in range(3)
    )


def build_hamiltonian(sys, a, field):
    """Return the 6x6 Hamiltonian D Sz^2 + gamma_e B.S + gamma_n B.I + S.A.I in MHz."""
    h = sys.d_zfs * SZ2 + zeeman_operator(sys, field.vector) + hyperfine_operator(a)
    # symmetrise away rounding so that H == H^dagger exactly
    return 0.5 * (h + h.conj().T)


@dataclass(frozen=True)
class EnergyLevels:
    """Eigensystem of the 6-level Hamiltonian.

    ``ms[k]`` and ``branch[k]`` label eigenvector ``vectors[:, k]``;
    ``overlap[k]`` is the squared weight in the assigned mS block and
    ``ambiguous[k]`` marks states whose weight fell below the threshold.
    """

    energies: np.ndarray
    vectors: np.ndarray
    ms: tuple = field(default=())
    branch: tuple = field(default=())
    overlap: np.ndarray = field(default=None)
    ambiguous: tuple = field(default=())

    def index(self, ms, branch):
        for k, (m, b) in enumerate(zip(self.ms, self.branch)):
            if m == ms and b == branch:
                return k
        raise LabelError(f"no state labelled (mS={ms}, branch={branch})")

    def states(self, ms):
        """Indices of the states labelled ``ms``, ordered by branch."""
        idx = [k for k, m in enumerate(self.ms) if m == ms]
        return sorted(idx, key=lambda k: self.branch[k])

    @property
    def is_ambiguous(self):
        return any(self.ambiguous)


def block_weights(vectors):
    """Squared weight of each eigenvector in the mS = +1, 0, -1 blocks, shape (3, n)."""
    p = np.abs(vectors) ** 2
    return p.reshape(3, 2, -1).sum(axis=1)


def label_states(energies, vectors, threshold=LABEL_THRESHOLD):
    """Assign (mS, branch) labels by maximal block overlap.

    Branch index orders the states sharing an mS label by energy. A state
    whose maximal block weight is below ``threshold`` keeps its best guess
    but is flagged in ``ambiguous``.
    """
    w = block_weights(vectors)
    best = np.argmax(w, axis=0)
    overlap = w[best, np.arange(w.shape[1])]
    ms = [MS_VALUES[b] for b in best]
    branch = [0] * len(ms)
    for m in MS_VALUES:
        idx = [k for k in range(len(ms)) if ms[k] == m]
        # energies are already sorted; stable order for ties
        for rank, k in enumerate(sorted(idx, key=lambda k: (energies[k], k))):
            branch[k] = rank
    # a block holding other than two states cannot be labelled consistently
    ambiguous = tuple(
        bool(o < threshold or ms.count(m) != 2) for o, m in zip(overlap, ms)
    )
    return EnergyLevels(
        energies=energies,
        vectors=vectors,
        ms=tuple(ms),
        branch=tuple(branch),
        overlap=overlap,
        ambiguous=ambiguous,
    )


def eigensystem(h, threshold=LABEL_THRESHOLD):
    """Diagonalise a Hermitian matrix and label its eigenstates.

    Eigenvalues come back ascending. Labels are only meaningful for the
    6-level NV/13C basis; other sizes return unlabelled levels.
    """
    h = np.asarray(h)
    try:
        energies, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"diagonalisation did not converge: {exc}") from exc
    if h.shape != (6, 6):
        return EnergyLevels(energies, vectors)
    return label_states(energies, vectors, threshold)


def solve(sys, a, field, threshold=LABEL_THRESHOLD):
    """Shortcut for ``eigensystem(build_hamiltonian(sys, a, field))``."""
    return eigensystem(build_hamiltonian(sys, a, field), threshold)
