"""
Estimation procedures: zero-quantum cos^2/sin^2 fit, Lorentzian ratio fit,
NV-axis orientation fit and the combined hyperfine-tensor fit with
sign-constraint filtering.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import DatasetError
from .lm import FitResult, lm_minimize, numeric_jacobian
from .models import AXIS, DEFAULTS, HYPERFINE, LineModel, nv_axis_lab
from .spectra import ESR
from .spin import HyperfineTensor, SpinSystemParams
from .tensor import SIGN_PATTERNS, det_sign, from_pas, pas_decompose

log = logging.getLogger(__name__)


class RankDeficientError(ValueError):
    pass


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# zero-quantum frequencies: kappa1 cos^2(phi) + kappa2 sin^2(phi)


@dataclass(frozen=True)
class ZqLinearFit:
    kappa1: float
    kappa2: float
    covariance: np.ndarray
    chi_rms: float

    @property
    def stderr(self):
        return np.sqrt(np.diag(self.covariance))

    @property
    def ratio(self):
        return self.kappa1 / self.kappa2


def fit_zq_linear(phi, delta, sigma=None):
    """Weighted linear least squares in the basis {cos^2 phi, sin^2 phi}.

    The covariance is (X^T W X)^-1 scaled by the reduced chi^2 when there
    are more points than parameters.
    """
    phi = np.radians(np.asarray(phi, dtype=float))
    y = np.asarray(delta, dtype=float)
    w = np.ones_like(y) if sigma is None else 1.0 / np.asarray(sigma, dtype=float) ** 2
    X = np.column_stack([np.cos(phi) ** 2, np.sin(phi) ** 2])
    normal = X.T @ (w[:, None] * X)
    sv = np.linalg.svd(normal, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise RankDeficientError("design matrix is rank deficient: kappa1/kappa2 unidentifiable")
    inv = np.linalg.inv(normal)
    beta = inv @ (X.T @ (w * y))
    resid = (y - X @ beta) * np.sqrt(w)
    dof = y.size - 2
    chi2 = float(resid @ resid)
    if dof > 0:
        cov = inv * (chi2 / dof)
        chi_rms = np.sqrt(chi2 / dof)
    else:
        cov, chi_rms = inv, 0.0
    return ZqLinearFit(float(beta[0]), float(beta[1]), cov, float(chi_rms))


# ---------------------------------------------------------------------------
# Lorentzian a b / ((phi - phi1)^2 + b^2)


def lorentzian(phi, a, b, phi1):
    return a * b / ((phi - phi1) ** 2 + b**2)


def lorentzian_jacobian(phi, a, b, phi1):
    u = phi - phi1
    den = u**2 + b**2
    return np.column_stack(
        [b / den, a * (u**2 - b**2) / den**2, 2 * a * b * u / den**2]
    )


@dataclass(frozen=True)
class LorentzianFit:
    a: float
    b: float
    phi1: float
    fit: FitResult
    resolved: bool

    @property
    def params(self):
        return np.array([self.a, self.b, self.phi1])

    @property
    def stderr(self):
        return self.fit.stderr


def _lorentzian_guess(phi, y):
    k = int(np.argmax(y))
    peak = y[k]
    base = np.min(y)
    half = base + 0.5 * (peak - base)
    above = phi[y >= half]
    width = max(np.ptp(above), np.min(np.diff(np.sort(phi)))) if above.size else np.ptp(phi)
    b = max(0.5 * width, 1e-3)
    return np.array([peak * b, b, phi[k]])


def fit_lorentzian(phi, ratio, sigma=None, max_iter=500):
    """Fit a b / ((phi - phi1)^2 + b^2) to a ratio curve (phi in degrees).

    ``resolved`` is False when the fit did not converge, the width grew
    beyond the span of the data (no peak) or shrank far below the grid
    spacing (a single-point spike).
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(ratio, dtype=float)
    if phi.size < 4:
        raise ValueError("need at least 4 points")
    s = np.ones_like(y) if sigma is None else np.asarray(sigma, dtype=float)
    x0 = _lorentzian_guess(phi, y)
    res = lm_minimize(
        lambda p: (lorentzian(phi, *p) - y) / s,
        x0,
        jac=lambda p: lorentzian_jacobian(phi, *p) / s[:, None],
        names=("a", "b", "phi1"),
        units=("deg", "deg", "deg"),
        max_iter=max_iter,
    )
    a, b, phi1 = res.params
    b = abs(b)
    spacing = np.min(np.diff(np.unique(phi)))
    resolved = bool(
        res.converged and 0.1 * spacing < b < np.ptp(phi) and phi.min() <= phi1 <= phi.max()
    )
    if not resolved:
        log.warning("Lorentzian fit unresolved: %s, b = %.3g", res.message, b)
    # the model is odd in (a, b) jointly; report b > 0
    if res.params[1] < 0:
        a = -a
    return LorentzianFit(float(a), float(b), float(phi1), res, resolved)


# ---------------------------------------------------------------------------
# NV axis orientation


@dataclass(frozen=True)
class OrientationModel:
    """NV z-axis in the lab frame plus the parameters fitted with it."""

    axis_polar: float
    axis_azimuth: float
    d_zfs: float
    gamma_e_b: float
    axis_roll: float = None
    a_zz: float = None
    a_xz: float = None

    @property
    def axis(self):
        return nv_axis_lab(self.axis_polar, self.axis_azimuth)

    @property
    def hyperfine_axial(self):
        if self.a_zz is None:
            return None
        return float(np.hypot(self.a_zz, self.a_xz))


def check_non_coplanar(dataset, tol=1e-6):
    units = np.array([o.unit for o in dataset.orientations.values() if o.frame == "lab"])
    if len(units) < 3:
        raise GeometryError("need at least three lab-frame orientations")
    sv = np.linalg.svd(units, compute_uv=False)
    if sv[-1] <= tol * sv[0]:
        raise GeometryError("field orientations are coplanar; NV axis is unidentifiable")


def _axis_starts():
    starts = [(0.0, 0.0)]
    for polar in (30.0, 60.0, 90.0):
        for az in range(0, 360, 45 if polar < 90 else 30):
            starts.append((polar, float(az)))
    return starts


def _bare_guess(dataset):
    mids, halves = [], []
    for oid in dataset.orientations:
        f = sorted(r.freq for r in dataset.lines_for(oid, ESR))
        if len(f) >= 2:
            mids.append(0.5 * (f[0] + f[-1]))
            halves.append(0.5 * (f[-1] - f[0]))
    return float(np.mean(mids)), float(np.max(halves))


def fit_orientation(
    dataset,
    model_kind="bare",
    sys=None,
    initial=None,
    fixed=None,
    n_best=6,
    max_iter=500,
):
    """Fit the NV axis direction, D and gamma_e*B to lab-frame ESR lines.

    Parameters
    ----------
    model_kind : {"bare", "hyperfine"}
        ``bare`` is an NV centre without 13C (two lines per orientation);
        ``hyperfine`` adds the roll angle about the axis and fits a_zz and
        a_xz with a_xx, a_yy held at ``fixed`` (defaults: 189.3, 128.4).
    initial : dict, optional
        Starting values; the axis is otherwise seeded from a grid.

    Returns
    -------
    (OrientationModel, FitResult)
    """
    if model_kind not in ("bare", "hyperfine"):
        raise ValueError(f"unknown model kind {model_kind!r}")
    if any(o.frame != "lab" for o in dataset.orientations.values()):
        raise DatasetError("orientation fit needs lab-frame orientations")
    if any(r.kind != ESR for r in dataset.lines):
        raise DatasetError("orientation fit uses ESR lines only")
    check_non_coplanar(dataset)
    hyper = model_kind == "hyperfine"
    base = dict(a_xx=189.3, a_yy=128.4, a_zz=128.9, a_xz=24.1)
    base.update(fixed or {})
    initial = dict(initial or {})
    if hyper:
        free = AXIS + ("d_zfs", "gamma_e_b", "a_zz", "a_xz")
        base.setdefault("d_zfs", DEFAULTS["d_zfs"])
        base.setdefault("gamma_e_b", DEFAULTS["gamma_e_b"])
    else:
        free = AXIS[:2] + ("d_zfs", "gamma_e_b")
        d0, g0 = _bare_guess(dataset)
        base.update(d_zfs=d0, gamma_e_b=g0)
    base.update(initial)

    if "axis_polar" in initial and "axis_azimuth" in initial:
        axis_starts = [(initial["axis_polar"], initial["axis_azimuth"])]
    else:
        axis_starts = _axis_starts()
    rolls = [initial.get("axis_roll", 0.0)] if (not hyper or "axis_roll" in initial) else [0.0, 90.0, 180.0, 270.0]
    starts = []
    for polar, az in axis_starts:
        for roll in rolls:
            p = dict(base, axis_polar=polar, axis_azimuth=az, axis_roll=roll)
            model = LineModel(dataset, p, free, sys, hyperfine=hyper)
            cost = float(np.sum(model.residuals(model.x0) ** 2))
            starts.append((cost, model))
    starts.sort(key=lambda s: s[0])
    best = None
    for _, model in starts[:n_best]:
        res = lm_minimize(
            model.residuals, model.x0, jac=model.jacobian,
            names=model.free, units=model.units, max_iter=max_iter,
        )
        if best is None or (res.converged, -res.cost) > (best.converged, -best.cost):
            best = res
    p = dict(zip(best.names, best.params))
    polar, az = p["axis_polar"], p["axis_azimuth"]
    # fold onto polar in [0, 180); the bare model cannot tell the axis from its reverse
    axis = nv_axis_lab(polar, az)
    if not hyper and axis[2] < 0:
        axis = -axis
    polar = float(np.degrees(np.arccos(np.clip(axis[2], -1, 1))))
    az = float(np.degrees(np.arctan2(axis[1], axis[0])) % 360.0)
    out = OrientationModel(
        axis_polar=polar,
        axis_azimuth=az,
        d_zfs=float(p["d_zfs"]),
        gamma_e_b=float(p["gamma_e_b"]),
        axis_roll=float(p["axis_roll"]) % 360.0 if hyper else None,
        a_zz=float(p["a_zz"]) if hyper else None,
        a_xz=float(p["a_xz"]) if hyper else None,
    )
    return out, best


# ---------------------------------------------------------------------------
# combined hyperfine fit


def multi_start(fit_op, initial, n_starts=1, seed=0, spread=0.5, dedupe=0.1):
    """Run ``fit_op`` from dispersed starts around ``initial``.

    ``initial`` maps parameter names to values. Start 0 is ``initial``
    itself; the others scale every hyperfine component by a factor in
    [1 - spread, 1 + spread], and odd starts take the opposite a_xz branch
    (with the roll angle turned by 180 degrees when it is free). Optima closer
    than ``dedupe`` (MHz, max-norm over hyperfine components) are merged.

    Returns FitResults ordered by (converged first, cost).
    """
    if n_starts < 1:
        raise ValueError("n_starts must be >= 1")
    rng = np.random.default_rng(seed)
    names = list(initial)
    hf = [k for k, n in enumerate(names) if n in HYPERFINE]
    x_init = np.array([initial[n] for n in names], dtype=float)
    results = []
    for k in range(n_starts):
        x0 = x_init.copy()
        if k > 0:
            x0[hf] *= rng.uniform(1 - spread, 1 + spread, size=len(hf))
            if "a_xz" in names and k % 2 == 1:
                x0[names.index("a_xz")] *= -1
                # (a_xz, roll) and (-a_xz, roll + 180) give identical spectra
                if "axis_roll" in names:
                    x0[names.index("axis_roll")] += 180.0
        res = fit_op(x0)
        res.extra["start"] = x0
        results.append(res)
    results.sort(key=lambda r: (not r.converged, r.cost))
    distinct = []
    for res in results:
        p = res.params[hf] if hf else res.params
        if any(
            np.max(np.abs(p - (d.params[hf] if hf else d.params))) < dedupe for d in distinct
        ):
            continue
        distinct.append(res)
    return distinct


@dataclass(frozen=True)
class Constraints:
    """Post-fit filters.

    det_sign : +1, -1 or None (no filter).
    rabi_bound : if a_xx and a_zz share a sign, |a_xz / a_zz| must stay below it.
    """

    det_sign: int = None
    rabi_bound: float = None

    def check(self, a):
        reasons = []
        if self.det_sign is not None and det_sign(a)[1] != self.det_sign:
            reasons.append("det sign")
        if (
            self.rabi_bound is not None
            and np.sign(a.a_xx) == np.sign(a.a_zz)
            and abs(a.a_xz) >= self.rabi_bound * abs(a.a_zz)
        ):
            reasons.append("Rabi ratio bound")
        return reasons


@dataclass
class Candidate:
    tensor: HyperfineTensor
    transform: str
    chi_rms: float
    stderr: np.ndarray
    covariance: np.ndarray
    fit: FitResult
    family: str

    @property
    def det(self):
        return det_sign(self.tensor)[0]


@dataclass
class FullFit:
    candidates: list
    optima: list
    rejected: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    lines_used: dict = field(default_factory=dict)


def _transform(signs):
    def apply(p):
        pas = pas_decompose(HyperfineTensor(*p))
        return from_pas(pas.values * np.array(signs), pas.zeta).as_array()

    return apply


def _flip_yy(params):
    out = dict(params)
    out["a_yy"] = -out["a_yy"]
    return out


def fit_hyperfine_full(
    dataset,
    initial,
    sys=None,
    constraints=None,
    refine=(),
    params=None,
    n_starts=1,
    seed=0,
    sign_families=True,
    max_iter=500,
):
    """Fit the four tensor components (plus optional nuisance parameters).

    Every optimum is expanded into its four spectrally equivalent sign
    solutions, which are then filtered by ``constraints`` and ranked by
    their own residual. With ``sign_families`` the search also starts from
    the a_yy-negated tensor, which reaches the opposite det(A) family that
    frequencies alone barely distinguish.

    Parameters
    ----------
    initial : HyperfineTensor
    refine : sequence of str
        Extra free parameters among d_zfs, gamma_e_b and the axis angles.
    params : dict
        Fixed values for the non-tensor parameters.
    """
    sys = sys or SpinSystemParams()
    constraints = constraints or Constraints()
    free = HYPERFINE + tuple(refine)
    base = dict(params or {})
    start = dict(zip(HYPERFINE, initial.as_array()))
    for name in refine:
        start[name] = base.get(name, DEFAULTS[name])
    families = [("initial", start)]
    if sign_families:
        families.append(("a_yy flipped", _flip_yy(start)))

    out = FullFit([], [], lines_used=dataset.used_lines())
    for family, init in families:
        model = LineModel(dataset, {**base, **init}, free, sys)

        def fit_op(x0, model=model):
            return lm_minimize(
                model.residuals, x0, jac=model.jacobian,
                names=model.free, units=model.units, max_iter=max_iter,
            )

        for res in multi_start(fit_op, init, n_starts, seed):
            res.extra["family"] = family
            if not res.converged:
                out.diagnostics.append(f"{family}: start did not converge ({res.message})")
                continue
            out.optima.append(res)
            _expand(out, model, res, family, constraints)

    out.candidates.sort(key=lambda c: c.chi_rms)
    distinct = []
    for c in out.candidates:
        if any(np.max(np.abs(c.tensor.as_array() - d.tensor.as_array())) < 0.1 for d in distinct):
            continue
        distinct.append(c)
    out.candidates = distinct
    if not out.candidates:
        out.diagnostics.append("no candidate satisfies the constraints")
    return out


def _expand(out, model, res, family, constraints):
    p = res.params[:4]
    cov4 = res.covariance[:4, :4]
    dof = max(len(model.dataset.lines) - len(model.free), 1)
    for name, signs in SIGN_PATTERNS.items():
        fn = _transform(signs)
        tensor = HyperfineTensor(*fn(p))
        if name == "identity":
            cov = cov4
        else:
            jt = numeric_jacobian(fn, p, 1e-7)
            cov = jt @ cov4 @ jt.T
        x = res.params.copy()
        x[:4] = tensor.as_array()
        r = model.residuals(x)
        cand = Candidate(
            tensor=tensor,
            transform=name,
            chi_rms=float(np.sqrt(r @ r / dof)),
            stderr=np.sqrt(np.clip(np.diag(cov), 0, None)),
            covariance=cov,
            fit=res,
            family=family,
        )
        reasons = constraints.check(tensor)
        if reasons:
            out.rejected.append((cand, reasons))
        else:
            out.candidates.append(cand)
