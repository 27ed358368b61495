"""
Command-line interface.

Every subcommand writes ``<command>.txt`` and ``<command>.json`` (plus CSV
tables where useful) into ``--out``. Exit codes: 0 success, 2 usage or
configuration error, 3 data error, 4 non-convergence.
"""

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import DatasetError, MeasuredDataset, RatioRecord, Orientation
from .fitting import (
    Constraints,
    GeometryError,
    RankDeficientError,
    fit_hyperfine_full,
    fit_lorentzian,
    fit_orientation,
    fit_zq_linear,
)
from .io import load_config, load_dataset, save_dataset, write_csv, write_report
from .spectra import (
    MicrowaveField,
    amplitude_ratio_profile,
    orientation_grid,
    spectrum,
    synth_dataset,
    zq_frequency_exact,
    zq_frequency_perturbative,
)
from .spin import FieldOrientation, HyperfineTensor, LabelError, eigensystem, build_hamiltonian
from .tensor import (
    EquivalenceError,
    classify_det_sign,
    classify_ratio_curve,
    det_sign,
    equivalent_solutions,
    pas_decompose,
)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4

log = logging.getLogger("nvc13")


class UsageError(Exception):
    pass


class ConvergenceError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _setup(args):
    try:
        cfg = load_config(args.config)
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    if args.seed is not None:
        cfg.fit.seed = args.seed
    if args.gamma_n_zero:
        cfg.gamma_n = 0.0
    for name in ("theta", "b_mT"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "tensor", None) is not None:
        cfg.tensor = list(args.tensor)
    if getattr(args, "mw", None) is not None:
        cfg.mw_direction = list(args.mw)
    if getattr(args, "det_sign", None) is not None:
        cfg.constraints.det_sign = args.det_sign
    if getattr(args, "n_starts", None) is not None:
        cfg.fit.n_starts = args.n_starts
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _tensor(cfg):
    return HyperfineTensor(*cfg.tensor)


def _mw(cfg):
    try:
        return MicrowaveField.along(cfg.mw_direction, cfg.system)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _phi_grid(cfg, span=360.0):
    return np.arange(0.0, span, cfg.phi_step)


def _dataset(args, require_lines=True):
    if args.data is None and args.orientations is None:
        raise UsageError("give --data DIR or --orientations/--lines")
    ds = load_dataset(args.data, args.orientations, args.lines, args.ratios)
    if require_lines and not ds.lines:
        raise DatasetError("dataset has no lines")
    return ds


def _out(args, cfg):
    return Path(args.out or cfg.out_dir)


def _fmt_tensor(a):
    return "(" + ", ".join(f"{v:.3f}" for v in a.as_array()) + ") MHz"


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args, cfg):
    a = _tensor(cfg)
    field = FieldOrientation(cfg.b_mT, cfg.theta, args.phi)
    lines = spectrum(cfg.system, a, field, _mw(cfg))
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(l.kind, l.freq, l.amplitude, str(l.initial), str(l.final)) for l in lines]
    write_csv(out / "simulate_lines.csv", ("kind", "freq_MHz", "amplitude", "initial", "final"), rows)
    distinct = sorted({round(l.freq, 6) for l in lines if l.kind == "esr"})
    summary = [f"tensor {_fmt_tensor(a)}", f"field {cfg.b_mT:.6f} mT at theta {cfg.theta}, phi {args.phi} deg", ""]
    summary += [f"{l.kind:3s} {l.freq:14.6f} MHz  amplitude {l.amplitude:.6f}" for l in lines]
    summary += ["", "distinct ESR frequencies: " + ", ".join(f"{f:.6f}" for f in distinct)]
    result = {
        "lines": [
            {"kind": l.kind, "freq_MHz": l.freq, "amplitude": l.amplitude,
             "initial": list(l.initial), "final": list(l.final)}
            for l in lines
        ],
        "distinct_esr_MHz": distinct,
    }
    write_report(out, "simulate", "\n".join(summary), result, cfg)
    return result


def cmd_zq(args, cfg):
    a = _tensor(cfg)
    phis = _phi_grid(cfg)
    exact, pert = [], []
    for phi in phis:
        field = FieldOrientation(cfg.b_mT, cfg.theta, phi)
        exact.append(zq_frequency_exact(eigensystem(build_hamiltonian(cfg.system, a, field))))
        pert.append(zq_frequency_perturbative(cfg.system, a, field))
    exact, pert = np.array(exact), np.array(pert)
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "zq.csv", ("phi_deg", "exact_MHz", "perturbative_MHz"), zip(phis, exact, pert))
    fe, fp = fit_zq_linear(phis, exact), fit_zq_linear(phis, pert)
    dev = float(np.max(np.abs(pert - exact) / exact))
    summary = (
        f"tensor {_fmt_tensor(a)}, theta {cfg.theta} deg\n"
        f"exact:        kappa1 = {fe.kappa1:.4f} MHz, kappa2 = {fe.kappa2:.4f} MHz\n"
        f"perturbative: kappa1 = {fp.kappa1:.4f} MHz, kappa2 = {fp.kappa2:.4f} MHz\n"
        f"max relative deviation perturbative vs exact: {dev:.4f}"
    )
    result = {
        "kappa_exact": [fe.kappa1, fe.kappa2],
        "kappa_perturbative": [fp.kappa1, fp.kappa2],
        "max_relative_deviation": dev,
    }
    write_report(out, "zq", summary, result, cfg)
    return result


def cmd_amplitudes(args, cfg):
    a = _tensor(cfg)
    phis = _phi_grid(cfg, 180.0)
    prof = amplitude_ratio_profile(cfg.system, a, cfg.theta, _mw(cfg), phis, cfg.b_mT)
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        (p, *f, *i, r, int(c))
        for p, f, i, r, c in zip(phis, prof.freqs, prof.intensities, prof.ratio, prof.crossing)
    ]
    cols = ("phi_deg", "f1_MHz", "f2_MHz", "f3_MHz", "f4_MHz", "I1", "I2", "I3", "I4", "ratio", "crossing")
    write_csv(out / "amplitudes.csv", cols, rows)
    verdict = classify_det_sign(prof)
    summary = (
        f"tensor {_fmt_tensor(a)}, theta {cfg.theta} deg, mw {cfg.mw_direction}\n"
        f"det(A) = {det_sign(a)[0]:.6g}; profile verdict: {verdict.verdict}\n"
        f"ratio peak/mean {verdict.peak_to_mean:.3g}, I1+I4 max/min {verdict.strong_modulation:.3g}"
    )
    result = {"verdict": verdict.verdict, "peak_to_mean": verdict.peak_to_mean,
              "strong_modulation": verdict.strong_modulation,
              "crossings": int(prof.crossing.sum())}
    write_report(out, "amplitudes", summary, result, cfg)
    return result


def cmd_fit_orientation(args, cfg):
    ds = _dataset(args)
    om, res = fit_orientation(ds, args.model, cfg.system, max_iter=cfg.fit.max_iter)
    out = _out(args, cfg)
    lines = [f"model {args.model}: {res.message}", f"chi_rms {res.chi_rms:.4g}", ""]
    for n, v, e, u in zip(res.names, res.params, res.stderr, res.units):
        lines.append(f"{n:14s} {v:14.6f} +- {e:.2g} {u}")
    lines.append(f"\nNV axis (lab): polar {om.axis_polar:.4f} deg, azimuth {om.axis_azimuth:.4f} deg")
    result = {"orientation": vars(om), "axis_unit": om.axis, "fit": res.as_dict()}
    write_report(out, "fit-orientation", "\n".join(lines), result, cfg)
    if not res.converged:
        raise ConvergenceError(f"orientation fit did not converge: {res.message}")
    return result


def cmd_fit_zq(args, cfg):
    ds = _dataset(args)
    groups = {}
    for rec in ds.lines:
        if rec.kind != "zq":
            continue
        o = ds.orientations[rec.orient_id]
        if o.frame != "nv":
            raise DatasetError(f"orientation {o.orient_id}: zero-quantum fit needs NV-frame angles")
        groups.setdefault(round(o.angle1, 6), []).append((o.angle2, rec.freq, rec.sigma))
    if not groups:
        raise DatasetError("dataset has no zero-quantum lines")
    # one cos^2/sin^2 fit per polar angle, since the amplitudes scale with sin(theta)
    result, lines = {}, []
    for theta in sorted(groups):
        phi, delta, sigma = (np.array(v) for v in zip(*groups[theta]))
        try:
            fit = fit_zq_linear(phi, delta, sigma)
        except RankDeficientError as exc:
            lines.append(f"theta {theta:g} deg: skipped ({exc})")
            continue
        result[f"{theta:g}"] = {"kappa1": fit.kappa1, "kappa2": fit.kappa2,
                                "covariance": fit.covariance, "chi_rms": fit.chi_rms, "n": len(phi)}
        lines.append(
            f"theta {theta:g} deg ({len(phi)} lines): kappa1 = {fit.kappa1:.4f} +- {fit.stderr[0]:.2g} MHz,"
            f" kappa2 = {fit.kappa2:.4f} +- {fit.stderr[1]:.2g} MHz, ratio {fit.ratio:.4f}"
        )
    write_report(_out(args, cfg), "fit-zq", "\n".join(lines), result, cfg)
    if not result:
        raise RankDeficientError("no polar angle has enough distinct phi values")
    return result


def cmd_fit_amplitudes(args, cfg):
    ds = _dataset(args, require_lines=False)
    if not ds.ratios:
        raise DatasetError("dataset has no ratio records")
    groups = {}
    for r in ds.ratios:
        groups.setdefault(r.orient_id, []).append(r)
    result, lines = {}, []
    for oid, recs in groups.items():
        phi = np.array([r.phi_deg for r in recs])
        ratio = np.array([r.ratio for r in recs])
        sig = np.array([r.sigma for r in recs])
        fit = fit_lorentzian(phi, ratio, sig, max_iter=cfg.fit.max_iter)
        verdict = classify_ratio_curve(phi, ratio)
        result[oid] = {"a": fit.a, "b": fit.b, "phi1": fit.phi1, "stderr": fit.stderr,
                       "resolved": fit.resolved, "det_verdict": verdict.verdict}
        lines.append(
            f"{oid}: a = {fit.a:.3f}, b = {fit.b:.3f} deg, phi1 = {fit.phi1:.3f} deg"
            f" ({'resolved' if fit.resolved else 'UNRESOLVED'}; det verdict {verdict.verdict})"
        )
    write_report(_out(args, cfg), "fit-amplitudes", "\n".join(lines), result, cfg)
    if not any(v["resolved"] for v in result.values()):
        raise ConvergenceError("no ratio curve gave a resolved Lorentzian")
    return result


_DET = {"pos": 1, "neg": -1, "any": None}


def cmd_fit_full(args, cfg):
    ds = _dataset(args)
    det = _DET[cfg.constraints.det_sign]
    notes = []
    if det is None and ds.ratios:
        groups = {}
        for r in ds.ratios:
            groups.setdefault(r.orient_id, []).append(r)
        verdicts = [
            classify_ratio_curve([r.phi_deg for r in g], [r.ratio for r in g]).verdict for g in groups.values()
        ]
        if verdicts and all(v == "positive" for v in verdicts):
            det = 1
            notes.append("det > 0 inferred from the ratio curves")
    constraints = Constraints(det, cfg.constraints.rabi_bound)
    params, refine = {}, list(args.refine or [])
    lab = any(o.frame == "lab" for o in ds.orientations.values())
    if lab:
        esr_only = MeasuredDataset(ds.orientations, [r for r in ds.lines if r.kind == "esr"])
        om, ores = fit_orientation(esr_only, "hyperfine", cfg.system,
                                   fixed=dict(a_xx=cfg.tensor[0], a_yy=cfg.tensor[1]))
        if not ores.converged:
            raise ConvergenceError(f"orientation stage did not converge: {ores.message}")
        params.update(axis_polar=om.axis_polar, axis_azimuth=om.axis_azimuth, axis_roll=om.axis_roll,
                      d_zfs=om.d_zfs, gamma_e_b=om.gamma_e_b)
        refine = list(dict.fromkeys(refine + ["axis_polar", "axis_azimuth", "axis_roll", "d_zfs", "gamma_e_b"]))
        notes.append(f"orientation stage: polar {om.axis_polar:.3f}, azimuth {om.axis_azimuth:.3f} deg")
    else:
        params.update(d_zfs=cfg.d_zfs, gamma_e_b=cfg.gamma_e * ds.reference_field)
    ff = fit_hyperfine_full(
        ds, _tensor(cfg), cfg.system, constraints, refine=refine, params=params,
        n_starts=cfg.fit.n_starts, seed=cfg.fit.seed, max_iter=cfg.fit.max_iter,
    )
    out = _out(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        (c.transform, c.family, *c.tensor.as_array(), *c.stderr, c.det, c.chi_rms) for c in ff.candidates
    ]
    cols = ("transform", "family", "a_xx", "a_yy", "a_zz", "a_xz",
            "err_xx", "err_yy", "err_zz", "err_xz", "det", "chi_rms")
    write_csv(out / "fit_full_candidates.csv", cols, rows)
    text = notes + [
        "constraints: det sign " + ("any" if det is None else ("> 0" if det > 0 else "< 0")),
        f"rabi bound {cfg.constraints.rabi_bound}",
        f"{len(ff.optima)} distinct optima, {len(ff.candidates)} candidates, {len(ff.rejected)} rejected",
        "",
    ]
    for c in ff.candidates:
        errs = ", ".join(f"{e:.2f}" for e in c.stderr)
        text.append(f"{c.transform:8s} {_fmt_tensor(c.tensor)} +- ({errs})  chi_rms {c.chi_rms:.3f}  [{c.family}]")
    text += [""] + ff.diagnostics
    result = {
        "candidates": [
            {"transform": c.transform, "family": c.family, "tensor": c.tensor.as_array(),
             "stderr": c.stderr, "covariance": c.covariance, "det": c.det, "chi_rms": c.chi_rms}
            for c in ff.candidates
        ],
        "optima": [r.as_dict() for r in ff.optima],
        "rejected": [{"tensor": c.tensor.as_array(), "reasons": why} for c, why in ff.rejected],
        "diagnostics": ff.diagnostics,
        "lines_used": ff.lines_used,
        "notes": notes,
    }
    write_report(out, "fit-full", "\n".join(text), result, cfg)
    if not ff.optima:
        raise ConvergenceError("no start converged")
    return result


def cmd_pas(args, cfg):
    a = _tensor(cfg)
    pas = pas_decompose(a)
    angles = ", ".join(f"{z:.2f}" for z in pas.equivalent_angles)
    summary = (
        f"tensor {_fmt_tensor(a)}\n"
        f"principal values (xx, yy, zz): ({pas.a_xx_bar:.3f}, {pas.a_yy_bar:.3f}, {pas.a_zz_bar:.3f}) MHz\n"
        f"ordered by magnitude: {', '.join(f'{v:.3f}' for v in pas.sorted_values)} MHz\n"
        f"zeta = {pas.zeta:.3f} deg; equivalent angles: {angles}\n"
        f"angle nearest the tetrahedral bond: {pas.preferred_angle:.3f} deg\n"
        f"det(A) = {det_sign(a)[0]:.6g} MHz^3"
    )
    result = {"values": pas.values, "zeta": pas.zeta, "equivalent_angles": pas.equivalent_angles,
              "preferred_angle": pas.preferred_angle, "det": det_sign(a)[0]}
    write_report(_out(args, cfg), "pas", summary, result, cfg)
    return result


def cmd_equiv(args, cfg):
    a = _tensor(cfg)
    sols = equivalent_solutions(a, cfg.system, seed=cfg.fit.seed)
    lines = [f"{n:8s} {_fmt_tensor(t)}  det {det_sign(t)[0]:.6g}" for n, t in zip(sols.names, sols.tensors)]
    lines.append(f"\nmax spectral deviation (gamma_n = 0): {sols.max_deviation:.3g} MHz")
    lines.append("a_xz sign is free: it flips with the choice of the x-axis direction")
    result = {"solutions": {n: t.as_array() for n, t in zip(sols.names, sols.tensors)},
              "max_deviation_MHz": sols.max_deviation}
    write_report(_out(args, cfg), "equiv", "\n".join(lines), result, cfg)
    return result


def cmd_classify_det(args, cfg):
    out = _out(args, cfg)
    if args.ratios or (args.data and Path(args.data, "ratios.csv").is_file()):
        ds = _dataset(args, require_lines=False)
        groups = {}
        for r in ds.ratios:
            groups.setdefault(r.orient_id, []).append(r)
        result = {}
        for oid, g in groups.items():
            v = classify_ratio_curve([r.phi_deg for r in g], [r.ratio for r in g])
            result[oid] = {"verdict": v.verdict, "peak_to_trough": v.peak_to_trough}
        summary = "\n".join(
            f"{k}: {v['verdict']} (peak/trough {v['peak_to_trough']:.3g})" for k, v in result.items()
        )
    else:
        a = _tensor(cfg)
        prof = amplitude_ratio_profile(cfg.system, a, cfg.theta, _mw(cfg), _phi_grid(cfg, 180.0), cfg.b_mT)
        v = classify_det_sign(prof)
        result = {"verdict": v.verdict, "peak_to_mean": v.peak_to_mean, "strong_modulation": v.strong_modulation,
                  "correlation_14": v.correlation_14, "weak_fraction": v.weak_fraction, "det": det_sign(a)[0]}
        summary = (
            f"tensor {_fmt_tensor(a)}, theta {cfg.theta} deg\nverdict: {v.verdict}\n"
            f"ratio peak/mean {v.peak_to_mean:.3g}, I1+I4 max/min {v.strong_modulation:.3g}, "
            f"corr(I1, I4) {v.correlation_14:.3f}, (I2+I3)/(I1+I4) {v.weak_fraction:.3f}"
        )
    write_report(out, "classify-det", summary, result, cfg)
    return result


def cmd_gen_synthetic(args, cfg):
    a = _tensor(cfg)
    thetas = args.thetas or [20.0, 55.0, 84.5]
    phis = args.phis or [0.0, 70.0, 150.0, 250.0]
    esr_w, zq_w = args.linewidths if args.linewidths else cfg.linewidths
    mw = _mw(cfg)
    synth = synth_dataset(cfg.system, a, orientation_grid(cfg.b_mT, thetas, phis), mw, (esr_w, zq_w), cfg.fit.seed)
    comment = (
        f"SYNTHETIC DATA generated by nvc13 {__version__}; not a measurement\n"
        f"tensor a_xx,a_yy,a_zz,a_xz = {','.join(repr(float(v)) for v in a.as_array())} MHz\n"
        f"D = {cfg.d_zfs} MHz, gamma_e = {cfg.gamma_e}, gamma_n = {cfg.gamma_n} MHz/mT, B = {cfg.b_mT!r} mT\n"
        f"linewidths esr,zq = {esr_w},{zq_w} MHz (sigma = linewidth / 2); seed = {cfg.fit.seed}"
    )
    if args.frame == "lab":
        comment += f"\nNV axis polar,azimuth,roll = {','.join(str(v) for v in args.axis)} deg"
    ds = MeasuredDataset.from_synthetic(synth, frame=args.frame, axis=args.axis, comment=comment)
    if args.with_ratios:
        rng = np.random.default_rng(cfg.fit.seed + 1)
        oid = "r01"
        orients = dict(ds.orientations)
        orients[oid] = Orientation(oid, "nv", 90.0, 0.0, cfg.b_mT)
        grid = np.arange(-45.0, 45.5, 1.0)
        prof = amplitude_ratio_profile(cfg.system, a, 90.0, mw, grid, cfg.b_mT)
        ratios = []
        for phi, r in zip(grid, prof.ratio):
            if np.isfinite(r) and r > 0:
                s = 0.02 * r
                ratios.append(RatioRecord(oid, float(phi), float(r + rng.normal(0.0, s)), float(s)))
        ds = MeasuredDataset(orients, ds.lines, ratios, comment)
    out = _out(args, cfg)
    save_dataset(ds, out, comment)
    summary = f"{len(ds.orientations)} orientations, {len(ds.lines)} lines, {len(ds.ratios)} ratios written to {out}"
    write_report(out, "gen-synthetic", summary, {"n_orientations": len(ds.orientations),
                                                 "n_lines": len(ds.lines), "n_ratios": len(ds.ratios)}, cfg)
    return ds


# ---------------------------------------------------------------------------
# parser


def _positive_seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (default from config: out)")
    common.add_argument("--seed", type=_positive_seed)
    common.add_argument("--gamma-n-zero", action="store_true", help="drop the nuclear Zeeman term")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="directory with orientations.csv, lines.csv [, ratios.csv]")
    data.add_argument("--orientations")
    data.add_argument("--lines")
    data.add_argument("--ratios")

    tensor = argparse.ArgumentParser(add_help=False)
    tensor.add_argument("--tensor", nargs=4, type=float, metavar=("AXX", "AYY", "AZZ", "AXZ"),
                        help="hyperfine tensor in the NV frame, MHz")

    fld = argparse.ArgumentParser(add_help=False)
    fld.add_argument("--theta", type=float, help="field polar angle in the NV frame, deg")
    fld.add_argument("--b-mT", dest="b_mT", type=float, help="field magnitude, mT")
    fld.add_argument("--mw", nargs=3, type=float, metavar=("X", "Y", "Z"), help="microwave direction, NV frame")

    parser = argparse.ArgumentParser(prog="nvc13", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, tensor, fld], help="ESR and ZQ lines for one field")
    p.add_argument("--phi", type=float, default=0.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("zq", parents=[common, tensor, fld], help="exact and perturbative ZQ frequency vs phi")
    p.set_defaults(func=cmd_zq)

    p = sub.add_parser("amplitudes", parents=[common, tensor, fld], help="low-frequency line amplitudes vs phi")
    p.set_defaults(func=cmd_amplitudes, theta_default=90.0)

    p = sub.add_parser("fit-orientation", parents=[common, data], help="NV axis, D and gamma_e B")
    p.add_argument("--model", choices=("bare", "hyperfine"), default="bare")
    p.set_defaults(func=cmd_fit_orientation)

    p = sub.add_parser("fit-zq", parents=[common, data], help="kappa1 cos^2 + kappa2 sin^2 fit")
    p.set_defaults(func=cmd_fit_zq)

    p = sub.add_parser("fit-amplitudes", parents=[common, data], help="Lorentzian fit of ratio curves")
    p.set_defaults(func=cmd_fit_amplitudes)

    p = sub.add_parser("fit-full", parents=[common, data, tensor], help="combined hyperfine tensor fit")
    p.add_argument("--det-sign", choices=("pos", "neg", "any"))
    p.add_argument("--n-starts", type=int)
    p.add_argument("--refine", nargs="*", choices=("d_zfs", "gamma_e_b"), help="extra free parameters")
    p.set_defaults(func=cmd_fit_full)

    p = sub.add_parser("pas", parents=[common, tensor], help="principal-axis decomposition")
    p.set_defaults(func=cmd_pas)

    p = sub.add_parser("equiv", parents=[common, tensor], help="spectrally equivalent sign solutions")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("classify-det", parents=[common, data, tensor, fld], help="sign of det(A)")
    p.set_defaults(func=cmd_classify_det, theta_default=90.0)

    p = sub.add_parser("gen-synthetic", parents=[common, tensor, fld], help="write a synthetic dataset")
    p.add_argument("--linewidths", nargs=2, type=float, metavar=("ESR", "ZQ"))
    p.add_argument("--thetas", nargs="+", type=float)
    p.add_argument("--phis", nargs="+", type=float)
    p.add_argument("--frame", choices=("nv", "lab"), default="nv")
    p.add_argument("--axis", nargs=3, type=float, metavar=("POLAR", "AZIMUTH", "ROLL"))
    p.add_argument("--with-ratios", action="store_true", help="add an amplitude-ratio sweep at theta = 90")
    p.set_defaults(func=cmd_gen_synthetic)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if getattr(args, "theta_default", None) is not None and args.theta is None and args.config is None:
        args.theta = args.theta_default
    if getattr(args, "frame", None) == "lab" and args.axis is None:
        parser.error("--frame lab needs --axis")
    try:
        cfg = _setup(args)
        args.func(args, cfg)
    except UsageError as exc:
        print(f"nvc13: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, GeometryError, RankDeficientError, LabelError, EquivalenceError, OSError) as exc:
        print(f"nvc13: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConvergenceError as exc:
        print(f"nvc13: not converged: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return 0


if __name__ == "__main__":
    sys.exit(main())
