"""
Dataset CSV files, JSON run configuration and deterministic result output.

File layout (UTF-8, header row required, ``#`` lines are comments)::

    orientations.csv  orient_id,frame,angle1_deg,angle2_deg,b_mT
    lines.csv         orient_id,kind,freq_MHz,sigma_MHz
    ratios.csv        orient_id,phi_deg,ratio,sigma
"""

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .dataset import FRAMES, KINDS, DatasetError, LineRecord, MeasuredDataset, Orientation, RatioRecord
from .spin import D_ZFS, GAMMA_C13, GAMMA_E, SpinSystemParams

ORIENTATION_COLUMNS = ("orient_id", "frame", "angle1_deg", "angle2_deg", "b_mT")
LINE_COLUMNS = ("orient_id", "kind", "freq_MHz", "sigma_MHz")
RATIO_COLUMNS = ("orient_id", "phi_deg", "ratio", "sigma")

FILENAMES = {"orientations": "orientations.csv", "lines": "lines.csv", "ratios": "ratios.csv"}


def _rows(path, columns):
    """Yield (line number, row dict) for a CSV file, skipping ``#`` comments."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        numbered = ((n, line) for n, line in enumerate(fh, start=1))
        content = [(n, line) for n, line in numbered if line.strip() and not line.lstrip().startswith("#")]
    if not content:
        raise DatasetError(f"{path}: empty file")
    reader = csv.reader([line for _, line in content])
    header = [h.strip() for h in next(reader)]
    missing = [c for c in columns if c not in header]
    if missing:
        raise DatasetError(f"{path}:{content[0][0]}: missing column(s) {', '.join(missing)}")
    for (n, _), row in zip(content[1:], reader):
        if len(row) != len(header):
            raise DatasetError(f"{path}:{n}: expected {len(header)} cells, found {len(row)}")
        yield n, {h: cell.strip() for h, cell in zip(header, row)}


def _number(path, n, row, col):
    try:
        value = float(row[col])
    except ValueError:
        raise DatasetError(f"{path}:{n}: column '{col}': non-numeric value {row[col]!r}") from None
    if not math.isfinite(value):
        raise DatasetError(f"{path}:{n}: column '{col}': value must be finite")
    return value


def read_orientations(path):
    out = {}
    for n, row in _rows(path, ORIENTATION_COLUMNS):
        oid = row["orient_id"]
        if not oid:
            raise DatasetError(f"{path}:{n}: column 'orient_id': empty")
        if oid in out:
            raise DatasetError(f"{path}:{n}: column 'orient_id': duplicate id {oid!r}")
        if row["frame"] not in FRAMES:
            raise DatasetError(f"{path}:{n}: column 'frame': expected one of {FRAMES}")
        b = _number(path, n, row, "b_mT")
        if b < 0:
            raise DatasetError(f"{path}:{n}: column 'b_mT': negative field")
        out[oid] = Orientation(
            oid,
            row["frame"],
            _number(path, n, row, "angle1_deg"),
            _number(path, n, row, "angle2_deg"),
            b,
        )
    if not out:
        raise DatasetError(f"{path}: no orientations")
    return out


def read_lines(path, orientations):
    lines = []
    for n, row in _rows(path, LINE_COLUMNS):
        if row["orient_id"] not in orientations:
            raise DatasetError(f"{path}:{n}: column 'orient_id': unknown orientation {row['orient_id']!r}")
        if row["kind"] not in KINDS:
            raise DatasetError(f"{path}:{n}: column 'kind': expected one of {KINDS}")
        sigma = _number(path, n, row, "sigma_MHz")
        if sigma <= 0:
            raise DatasetError(f"{path}:{n}: column 'sigma_MHz': uncertainty must be > 0")
        lines.append(LineRecord(row["orient_id"], row["kind"], _number(path, n, row, "freq_MHz"), sigma))
    return lines


def read_ratios(path, orientations):
    ratios = []
    for n, row in _rows(path, RATIO_COLUMNS):
        if row["orient_id"] not in orientations:
            raise DatasetError(f"{path}:{n}: column 'orient_id': unknown orientation {row['orient_id']!r}")
        sigma = _number(path, n, row, "sigma")
        if sigma <= 0:
            raise DatasetError(f"{path}:{n}: column 'sigma': uncertainty must be > 0")
        ratios.append(
            RatioRecord(row["orient_id"], _number(path, n, row, "phi_deg"), _number(path, n, row, "ratio"), sigma)
        )
    return ratios


def _header_comment(path):
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.lstrip().startswith("#"):
                break
            lines.append(line.lstrip()[1:].strip())
    return "\n".join(lines)


def load_dataset(path=None, orientations=None, lines=None, ratios=None):
    """Read a dataset from a directory or from explicit file paths.

    With ``path`` a directory, the standard file names are used and
    ``ratios.csv`` is optional. Explicit paths override the directory.
    """
    if path is not None:
        path = Path(path)
        if not path.is_dir():
            raise DatasetError(f"{path}: not a directory")
        orientations = orientations or path / FILENAMES["orientations"]
        lines = lines or path / FILENAMES["lines"]
        if ratios is None and (path / FILENAMES["ratios"]).is_file():
            ratios = path / FILENAMES["ratios"]
    if orientations is None:
        raise DatasetError("an orientations file is required")
    orients = read_orientations(orientations)
    line_recs = read_lines(lines, orients) if lines is not None else []
    ratio_recs = read_ratios(ratios, orients) if ratios is not None else []
    return MeasuredDataset(orients, line_recs, ratio_recs, _header_comment(orientations))


def _fmt(x):
    return repr(float(x))


def write_csv(path, columns, rows, comment=None):
    """Write a CSV table with optional ``#`` comment header. Floats use repr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if comment:
            for line in comment.splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def save_dataset(dataset, directory, comment=None):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    comment = comment if comment is not None else dataset.comment
    write_csv(
        directory / FILENAMES["orientations"],
        ORIENTATION_COLUMNS,
        [(o.orient_id, o.frame, o.angle1, o.angle2, o.b_mT) for o in dataset.orientations.values()],
        comment,
    )
    write_csv(
        directory / FILENAMES["lines"],
        LINE_COLUMNS,
        [(r.orient_id, r.kind, r.freq, r.sigma) for r in dataset.lines],
        comment,
    )
    if dataset.ratios:
        write_csv(
            directory / FILENAMES["ratios"],
            RATIO_COLUMNS,
            [(r.orient_id, r.phi_deg, r.ratio, r.sigma) for r in dataset.ratios],
            comment,
        )


# ---------------------------------------------------------------------------
# configuration


@dataclass
class FitOptions:
    xtol: float = 1e-10
    ftol: float = 1e-12
    max_iter: int = 500
    n_starts: int = 4
    seed: int = 0


@dataclass
class ConstraintOptions:
    det_sign: str = "any"
    rabi_bound: float = 0.3


@dataclass
class RunConfig:
    """Every field is optional in the JSON file; missing ones keep these defaults.

    ``b_mT`` defaults to gamma_e * B = 63.3 MHz. ``tensor`` is the initial or
    simulated (a_xx, a_yy, a_zz, a_xz) in MHz.
    """

    d_zfs: float = D_ZFS
    gamma_e: float = GAMMA_E
    gamma_n: float = GAMMA_C13
    b_mT: float = 63.3 / GAMMA_E
    mw_direction: list = field(default_factory=lambda: [1.0, 0.0, 0.0])
    tensor: list = field(default_factory=lambda: [189.3, 128.4, 128.9, 24.1])
    theta: float = 84.5
    phi_step: float = 5.0
    linewidths: list = field(default_factory=lambda: [0.6, 0.06])
    fit: FitOptions = field(default_factory=FitOptions)
    constraints: ConstraintOptions = field(default_factory=ConstraintOptions)
    out_dir: str = "out"

    def __post_init__(self):
        if isinstance(self.fit, dict):
            self.fit = _build(FitOptions, self.fit, "fit")
        if isinstance(self.constraints, dict):
            self.constraints = _build(ConstraintOptions, self.constraints, "constraints")
        self.validate()

    def validate(self):
        f = self.fit
        if not (f.xtol > 0 and f.ftol > 0):
            raise ValueError("config: tolerances must be > 0")
        if f.max_iter < 1 or f.n_starts < 1:
            raise ValueError("config: max_iter and n_starts must be >= 1")
        if not isinstance(f.seed, int) or f.seed < 0:
            raise ValueError("config: seed must be a non-negative integer")
        if self.constraints.det_sign not in ("pos", "neg", "any"):
            raise ValueError("config: constraints.det_sign must be pos, neg or any")
        if len(self.tensor) != 4 or len(self.mw_direction) != 3 or len(self.linewidths) != 2:
            raise ValueError("config: tensor needs 4, mw_direction 3 and linewidths 2 values")
        if self.b_mT < 0 or self.phi_step <= 0:
            raise ValueError("config: b_mT must be >= 0 and phi_step > 0")

    @property
    def system(self):
        return SpinSystemParams(self.d_zfs, self.gamma_e, self.gamma_n)

    def as_dict(self):
        return asdict(self)


def _build(cls, data, where):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"config: unknown key(s) in {where}: {sorted(unknown)}")
    return cls(**data)


def load_config(path=None):
    if path is None:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return _build(RunConfig, data, "config")


# ---------------------------------------------------------------------------
# output


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, obj):
    """Deterministic JSON: sorted keys, repr floats, non-finite as strings."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def constants_snapshot(config):
    from . import __version__

    return {
        "package_version": __version__,
        "d_zfs_MHz": config.d_zfs,
        "gamma_e_MHz_per_mT": config.gamma_e,
        "gamma_n_MHz_per_mT": config.gamma_n,
        "b_mT": config.b_mT,
        "gamma_e_b_MHz": config.gamma_e * config.b_mT,
    }


def write_report(out_dir, name, summary, result, config):
    """Write ``<name>.txt`` (human readable) and ``<name>.json`` (machine readable)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = {"config": config.as_dict(), "constants": constants_snapshot(config)}
    write_json(out_dir / f"{name}.json", {"command": name, "result": result, **snapshot})
    text = [f"{name}", "=" * len(name), "", summary.rstrip(), "", "constants:"]
    text += [f"  {k} = {v}" for k, v in snapshot["constants"].items()]
    text += ["", "config:", json.dumps(_plain(snapshot["config"]), indent=2, sort_keys=True)]
    (out_dir / f"{name}.txt").write_text("\n".join(text) + "\n", encoding="utf-8")
    return out_dir / f"{name}.txt"


def data_path(*parts):
    """Path of a file shipped inside the package ``data`` directory."""
    return Path(os.path.dirname(__file__), "data", *parts)
