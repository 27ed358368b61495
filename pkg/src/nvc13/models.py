"""
Line-frequency residual model for measured datasets.

Frequencies come from exact diagonalisation; derivatives use the
Hellmann-Feynman theorem, dE_k/dp = <k|dH/dp|k>, which is exact away from
degeneracies. Model lines are matched to measured lines of the same kind
greedily by frequency distance, one to one, inside every orientation.
"""

import numpy as np

from .dataset import DatasetError
from .spectra import ESR, ZQ
from .spin import I_OPS, S_OPS, SZ2, SpinSystemParams, spin_matrices

HYPERFINE = ("a_xx", "a_yy", "a_zz", "a_xz")
AXIS = ("axis_polar", "axis_azimuth", "axis_roll")
PARAM_UNITS = {
    "a_xx": "MHz",
    "a_yy": "MHz",
    "a_zz": "MHz",
    "a_xz": "MHz",
    "d_zfs": "MHz",
    "gamma_e_b": "MHz",
    "axis_polar": "deg",
    "axis_azimuth": "deg",
    "axis_roll": "deg",
}
DEFAULTS = {
    "a_xx": 0.0,
    "a_yy": 0.0,
    "a_zz": 0.0,
    "a_xz": 0.0,
    "d_zfs": 2870.2,
    "gamma_e_b": 63.3,
    "axis_polar": 0.0,
    "axis_azimuth": 0.0,
    "axis_roll": 0.0,
}

_HF_OPS = {
    "a_xx": S_OPS[0] @ I_OPS[0],
    "a_yy": S_OPS[1] @ I_OPS[1],
    "a_zz": S_OPS[2] @ I_OPS[2],
    "a_xz": S_OPS[0] @ I_OPS[2] + S_OPS[2] @ I_OPS[0],
}
_S3 = spin_matrices(1)
_SZ2_3 = _S3[2] @ _S3[2]


def _rz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _ry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _drz(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


def _dry(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def axis_rotation(polar, azimuth, roll):
    """Rotation taking NV-frame coordinates to the lab frame, and its angle derivatives.

    R = Rz(azimuth) Ry(polar) Rz(roll); the NV z-axis maps onto the lab
    direction (polar, azimuth). Derivatives are per degree.
    """
    p, a, r = np.radians([polar, azimuth, roll])
    rz_a, ry_p, rz_r = _rz(a), _ry(p), _rz(r)
    rot = rz_a @ ry_p @ rz_r
    k = np.pi / 180.0
    d = {
        "axis_polar": k * rz_a @ _dry(p) @ rz_r,
        "axis_azimuth": k * _drz(a) @ ry_p @ rz_r,
        "axis_roll": k * rz_a @ ry_p @ _drz(r),
    }
    return rot, d


def nv_axis_lab(polar, azimuth):
    p, a = np.radians([polar, azimuth])
    return np.array([np.sin(p) * np.cos(a), np.sin(p) * np.sin(a), np.cos(p)])


def _greedy_assign(measured, model):
    """Pairs (i_meas, j_model) minimising |f_i - g_j| greedily, one to one."""
    if len(measured) > len(model):
        raise DatasetError(
            f"{len(measured)} measured lines but only {len(model)} model lines"
        )
    diff = np.abs(np.subtract.outer(np.asarray(measured), np.asarray(model)))
    order = np.argsort(diff, axis=None, kind="stable")
    used_i, used_j, pairs = set(), set(), {}
    for flat in order:
        i, j = divmod(int(flat), diff.shape[1])
        if i in used_i or j in used_j:
            continue
        pairs[i] = j
        used_i.add(i)
        used_j.add(j)
        if len(pairs) == len(measured):
            break
    return pairs


class LineModel:
    """Weighted residuals of measured line frequencies.

    Parameters
    ----------
    dataset : MeasuredDataset
    params : dict
        Values for any of ``DEFAULTS``; unspecified ones take the defaults.
    free : sequence of str
        Names of the parameters varied by the fit, in vector order.
    hyperfine : bool
        6-level NV/13C model if True, bare 3-level NV (no 13C) otherwise.
    """

    def __init__(self, dataset, params=None, free=HYPERFINE, sys=None, hyperfine=True):
        sys = sys or SpinSystemParams()
        self.dataset = dataset
        self.base = dict(DEFAULTS)
        self.base.update(params or {})
        unknown = set(free) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown parameters {sorted(unknown)}")
        self.free = tuple(free)
        self.hyperfine = hyperfine
        self.rho = sys.gamma_n / sys.gamma_e if hyperfine else 0.0
        self.b_ref = dataset.reference_field or 1.0
        self.orients = list(dataset.orientations.values())
        self.meas = {}
        for k, rec in enumerate(dataset.lines):
            if rec.kind == ZQ and not hyperfine:
                raise DatasetError("zero-quantum lines need the hyperfine model")
            self.meas.setdefault(rec.orient_id, {ESR: [], ZQ: []})[rec.kind].append(k)
        self.sigma = np.array([rec.sigma for rec in dataset.lines])
        self.freq = np.array([rec.freq for rec in dataset.lines])
        if hyperfine:
            self._T = tuple(S_OPS[k] + self.rho * I_OPS[k] for k in range(3))
            self._dzfs = SZ2
        else:
            self._T = _S3
            self._dzfs = _SZ2_3
        self._cache = (None, None)

    @property
    def x0(self):
        return np.array([self.base[n] for n in self.free])

    @property
    def units(self):
        return tuple(PARAM_UNITS[n] for n in self.free)

    def full(self, x):
        p = dict(self.base)
        p.update(zip(self.free, (float(v) for v in x)))
        return p

    def _field(self, orient, p):
        """Unit field in the NV frame and its derivatives w.r.t. the axis angles."""
        if orient.frame == "nv":
            return orient.unit, {}
        rot, drot = axis_rotation(p["axis_polar"], p["axis_azimuth"], p["axis_roll"])
        lab = orient.unit
        return rot.T @ lab, {name: d.T @ lab for name, d in drot.items()}

    def _hamiltonian(self, p, n, g):
        h = p["d_zfs"] * self._dzfs + g * sum(n[k] * self._T[k] for k in range(3))
        if self.hyperfine:
            h = h + sum(p[name] * _HF_OPS[name] for name in HYPERFINE)
        return 0.5 * (h + h.conj().T)

    def _evaluate(self, x, need_jac):
        x = np.asarray(x, dtype=float)
        cached_x, cached = self._cache
        if cached_x is not None and np.array_equal(cached_x, x) and (cached[1] is not None or not need_jac):
            return cached
        p = self.full(x)
        m = len(self.dataset.lines)
        model = np.zeros(m)
        jac = np.zeros((m, len(self.free))) if need_jac else None
        matched = [None] * m
        for orient in self.orients:
            ids = self.meas.get(orient.orient_id)
            if ids is None:
                continue
            n, dn = self._field(orient, p)
            scale = orient.b_mT / self.b_ref
            g = p["gamma_e_b"] * scale
            energies, vecs = np.linalg.eigh(self._hamiltonian(p, n, g))
            dim = len(energies)
            weight0 = (np.abs(vecs) ** 2).reshape(3, dim // 3, dim).sum(axis=1)[1]
            zero = sorted(np.argsort(weight0)[-(dim // 3):])
            upper = [k for k in range(dim) if k not in zero]
            esr = sorted(((energies[f] - energies[i], i, f) for i in zero for f in upper))
            transitions = {}
            pairs = _greedy_assign(self.freq[ids[ESR]], [e[0] for e in esr])
            for a, b in pairs.items():
                transitions[ids[ESR][a]] = esr[b][1:]
            if ids[ZQ]:
                if len(ids[ZQ]) > 1:
                    raise DatasetError(f"orientation {orient.orient_id}: more than one ZQ line")
                transitions[ids[ZQ][0]] = (zero[0], zero[1])
            for row, (i, f) in transitions.items():
                model[row] = energies[f] - energies[i]
                matched[row] = (orient.orient_id, int(i), int(f))
            if not need_jac:
                continue
            # dH/dp expectation values for every eigenstate
            expect = {}
            tn = sum(n[k] * self._T[k] for k in range(3))
            for name in self.free:
                if name in HYPERFINE:
                    op = _HF_OPS[name]
                elif name == "d_zfs":
                    op = self._dzfs
                elif name == "gamma_e_b":
                    op = scale * tn
                elif name in dn:
                    op = g * sum(dn[name][k] * self._T[k] for k in range(3))
                else:
                    expect[name] = np.zeros(dim)
                    continue
                expect[name] = np.real(np.einsum("ik,ij,jk->k", vecs.conj(), op, vecs))
            for row, (i, f) in transitions.items():
                for c, name in enumerate(self.free):
                    jac[row, c] = expect[name][f] - expect[name][i]
        resid = (model - self.freq) / self.sigma
        if need_jac:
            jac = jac / self.sigma[:, None]
        self._cache = (x.copy(), (resid, jac, model, tuple(matched)))
        return resid, jac, model, tuple(matched)

    def residuals(self, x):
        return self._evaluate(x, False)[0]

    def jacobian(self, x):
        return self._evaluate(x, True)[1]

    def predicted(self, x):
        """Model frequency matched to every measured line (MHz)."""
        return self._evaluate(x, False)[2]

    def transitions(self, x):
        """(orient_id, lower, upper) eigenstate indices matched to every line.

        The residuals are piecewise smooth; they jump where this assignment
        changes.
        """
        return self._evaluate(x, False)[3]
