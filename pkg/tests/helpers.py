"""Dataset builders shared by the fitting, CLI and acceptance tests."""

import numpy as np

from nvc13.dataset import LineRecord, MeasuredDataset, Orientation
from nvc13.models import axis_rotation
from nvc13.spectra import bare_esr_frequencies
from nvc13.spin import FieldOrientation, SpinSystemParams

NINE_LAB = [(60, 0), (60, 120), (60, 240), (20, 30), (90, 90), (120, 200), (45, 300), (150, 10), (100, 330)]


def bare_lab_dataset(b_mT, axis=(30.0, 40.0), directions=NINE_LAB, d_zfs=2870.2, sigma=1e-6, noise=0.0, seed=0):
    """Lab-frame ESR lines of an NV centre without 13C."""
    sys = SpinSystemParams(d_zfs=d_zfs)
    rot = axis_rotation(axis[0], axis[1], 0.0)[0]
    rng = np.random.default_rng(seed)
    orients, lines = [], []
    for k, (t, p) in enumerate(directions):
        o = Orientation(f"L{k + 1}", "lab", float(t), float(p), b_mT)
        orients.append(o)
        field = FieldOrientation.from_vector(b_mT * (rot.T @ o.unit))
        for f in bare_esr_frequencies(sys, field):
            lines.append(LineRecord(o.orient_id, "esr", f + noise * rng.normal(), sigma))
    return MeasuredDataset(orients, lines, [], "synthetic bare centre")
