"""Measured (or synthetic) line data keyed by field orientation."""

from dataclasses import dataclass, field

import numpy as np

from .spectra import ESR, ZQ

FRAMES = ("nv", "lab")
KINDS = (ESR, ZQ)


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Orientation:
    """A field setting.

    For ``frame == "nv"`` the angles are (theta, phi) in the NV frame; for
    ``"lab"`` they are the polar and azimuthal angle of the field in the
    laboratory frame. Degrees throughout.
    """

    orient_id: str
    frame: str
    angle1: float
    angle2: float
    b_mT: float

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise DatasetError(f"unknown frame {self.frame!r}")
        if not self.b_mT >= 0:
            raise DatasetError(f"orientation {self.orient_id}: negative field")

    @property
    def unit(self):
        th, ph = np.radians(self.angle1), np.radians(self.angle2)
        return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


@dataclass(frozen=True)
class LineRecord:
    orient_id: str
    kind: str
    freq: float
    sigma: float


@dataclass(frozen=True)
class RatioRecord:
    orient_id: str
    phi_deg: float
    ratio: float
    sigma: float


@dataclass
class MeasuredDataset:
    orientations: dict
    lines: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    comment: str = ""

    def __post_init__(self):
        if isinstance(self.orientations, (list, tuple)):
            self.orientations = {o.orient_id: o for o in self.orientations}
        self.validate()

    def validate(self):
        for rec in self.lines:
            if rec.orient_id not in self.orientations:
                raise DatasetError(f"line references unknown orientation {rec.orient_id!r}")
            if rec.kind not in KINDS:
                raise DatasetError(f"unknown line kind {rec.kind!r}")
            if not rec.sigma > 0:
                raise DatasetError(f"non-positive uncertainty for {rec.orient_id}")
        for rec in self.ratios:
            if rec.orient_id not in self.orientations:
                raise DatasetError(f"ratio references unknown orientation {rec.orient_id!r}")
            if not rec.sigma > 0:
                raise DatasetError(f"non-positive ratio uncertainty for {rec.orient_id}")

    @property
    def reference_field(self):
        """Field magnitude (mT) of the first orientation; gamma_e*B refers to it."""
        return next(iter(self.orientations.values())).b_mT

    def lines_for(self, orient_id, kind=None):
        return [
            r for r in self.lines if r.orient_id == orient_id and (kind is None or r.kind == kind)
        ]

    def used_lines(self):
        """Count of lines of each kind per orientation."""
        out = {}
        for rec in self.lines:
            out.setdefault(rec.orient_id, {ESR: 0, ZQ: 0})[rec.kind] += 1
        return out

    @classmethod
    def from_synthetic(cls, synth, frame="nv", kinds=KINDS, comment="synthetic", axis=None):
        """Convert a :class:`~nvc13.spectra.SyntheticDataset`.

        With ``frame="lab"`` the NV-frame field directions are rotated into
        the lab frame by ``axis = (polar, azimuth, roll)`` in degrees (see
        :func:`nvc13.models.axis_rotation`).
        """
        if frame not in FRAMES:
            raise DatasetError(f"unknown frame {frame!r}")
        if frame == "lab":
            from .models import axis_rotation

            if axis is None:
                raise DatasetError("lab frame needs the NV axis angles")
            rot = axis_rotation(*axis)[0]
        orients, lines = [], []
        for k, (o, recs) in enumerate(synth.records):
            oid = f"o{k + 1:02d}"
            if frame == "nv":
                orients.append(Orientation(oid, "nv", o.theta, o.phi, o.b_mag))
            else:
                u = rot @ o.unit
                polar = float(np.degrees(np.arccos(np.clip(u[2], -1.0, 1.0))))
                azimuth = float(np.degrees(np.arctan2(u[1], u[0])) % 360.0)
                orients.append(Orientation(oid, "lab", polar, azimuth, o.b_mag))
            for kind, freq, sigma, _amp in recs:
                if kind in kinds:
                    lines.append(LineRecord(oid, kind, freq, sigma))
        return cls(orients, lines, [], comment)
