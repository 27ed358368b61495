"""Spectra and hyperfine-tensor estimation for an NV centre coupled to a 13C nucleus."""

__version__ = "0.1.0"

from .dataset import DatasetError, LineRecord, MeasuredDataset, Orientation, RatioRecord
from .fitting import (
    Constraints,
    GeometryError,
    RankDeficientError,
    fit_hyperfine_full,
    fit_lorentzian,
    fit_orientation,
    fit_zq_linear,
    multi_start,
)
from .lm import FitResult, lm_minimize
from .spectra import (
    MicrowaveField,
    amplitude_ratio_profile,
    esr_lines,
    orientation_grid,
    spectrum,
    synth_dataset,
    zq_frequency_exact,
    zq_frequency_perturbative,
)
from .spin import (
    D_ZFS,
    GAMMA_C13,
    GAMMA_E,
    FieldOrientation,
    HyperfineTensor,
    SpinSystemParams,
    build_hamiltonian,
    eigensystem,
    solve,
)
from .tensor import (
    classify_det_sign,
    det_sign,
    equivalent_solutions,
    from_pas,
    pas_decompose,
)

#: first-shell 13C tensor in the NV frame (MHz), default for simulations
SOLUTION_1 = HyperfineTensor(189.3, 128.4, 128.9, 24.1)
