import numpy as np
import pytest

from nvc13.spectra import (
    ESR,
    ZQ,
    MicrowaveField,
    amplitude_ratio_profile,
    esr_lines,
    orientation_grid,
    rabi_ratio,
    spectrum,
    synth_dataset,
    zq_frequency_exact,
    zq_frequency_perturbative,
)
from nvc13.spin import (
    D_ZFS,
    FieldOrientation,
    HyperfineTensor,
    LabelError,
    SpinSystemParams,
    ZERO_TENSOR,
    solve,
)

from conftest import B_MT, GAMMA_E_B, SOL, random_unit


def test_uncoupled_axial_spectrum(sys0):
    mw = MicrowaveField.along([1, 0, 0])
    lines = spectrum(sys0, ZERO_TENSOR, FieldOrientation(B_MT, 0, 0), mw)
    esr = [l for l in lines if l.kind == ESR]
    assert len(esr) == 8 and lines[-1].kind == ZQ
    freqs = np.array([l.freq for l in esr])
    assert np.allclose(freqs[:4], D_ZFS - GAMMA_E_B)
    assert np.allclose(freqs[4:], D_ZFS + GAMMA_E_B)
    amps = np.array([l.amplitude for l in esr])
    allowed = amps[amps > 1e-9]
    # nuclear spectator: allowed lines all equal, one per (mS, mI) pair
    assert len(allowed) == 4 and np.allclose(allowed, allowed[0])


def test_axial_drive_selection_rule(sys0):
    mw = MicrowaveField.along([0, 0, 1])
    lines = spectrum(sys0, ZERO_TENSOR, FieldOrientation(B_MT, 0, 0), mw)
    assert max(l.amplitude for l in lines if l.kind == ESR) < 1e-20


def test_axial_field_hyperfine_groups(sysp, sol1, mw_x):
    lines = [l for l in spectrum(sysp, sol1, FieldOrientation(B_MT, 0, 0), mw_x) if l.kind == ESR]
    by_target = {}
    for l in lines:
        by_target.setdefault(l.final[0], []).append(l.freq)
    assert sorted(by_target) == [-1, 1] and all(len(v) == 4 for v in by_target.values())
    for freqs in by_target.values():
        # the two hyperfine partners of each electron transition
        assert np.ptp(freqs) == pytest.approx(131.0, abs=4.0)
    # the inner lines of both manifolds sit just above D because the coupling exceeds 2 gamma_e B
    f = np.sort([l.freq for l in lines])
    assert np.sum(f < D_ZFS) == 2


def test_zq_bare_nuclear_zeeman(sysp):
    levels = solve(sysp, ZERO_TENSOR, FieldOrientation(B_MT, 0, 0))
    # levels +-gamma_n B / 2 split by gamma_n B
    assert zq_frequency_exact(levels) == pytest.approx(sysp.gamma_n * B_MT, rel=1e-9)


def test_zq_vanishes_without_couplings(sys0):
    levels = solve(sys0, ZERO_TENSOR, FieldOrientation(B_MT, 50, 20))
    assert zq_frequency_exact(levels) == pytest.approx(0.0, abs=1e-9)


def test_zq_exact_near_reference(sysp, sol1):
    levels = solve(sysp, sol1, FieldOrientation(B_MT, 84.5, 0.0))
    assert zq_frequency_exact(levels) == pytest.approx(8.5, rel=0.03)


def test_zq_perturbative_values(sysp):
    a = HyperfineTensor(193.0, 133.5, 0.0, 0.0)
    assert zq_frequency_perturbative(sysp, a, FieldOrientation(B_MT, 84.5, 0)) == pytest.approx(8.47, abs=0.05)
    assert zq_frequency_perturbative(sysp, a, FieldOrientation(B_MT, 84.5, 90)) == pytest.approx(5.86, abs=0.05)
    assert zq_frequency_perturbative(sysp, a, FieldOrientation(B_MT, 0, 40)) == 0.0


def test_zq_perturbative_symmetry(sysp, sol1, rng):
    for phi in rng.uniform(0, 360, 20):
        f = lambda p: zq_frequency_perturbative(sysp, sol1, FieldOrientation(B_MT, 70, p))
        assert f(phi) == f(-phi) == pytest.approx(f(180 - phi), rel=1e-14)


@pytest.mark.parametrize("key", [1, 2, 3, 4])
@pytest.mark.parametrize("theta", [60.0, 75.0, 84.5, 90.0])
def test_perturbative_matches_exact(sysp, key, theta):
    a = SOL[key]
    for phi in np.arange(0, 360, 10):
        field = FieldOrientation(B_MT, theta, phi)
        exact = zq_frequency_exact(solve(sysp, a, field))
        assert abs(zq_frequency_perturbative(sysp, a, field) - exact) / exact <= 0.05


def _block_strength(levels, mw):
    """Tr(P0 V P1 V) with P0 the mS = 0 eigenvectors and P1 the rest."""
    v = levels.vectors
    zero = list(levels.states(0))
    rest = [k for k in range(6) if k not in zero]
    m = v[:, rest].conj().T @ mw.operator @ v[:, zero]
    return float(np.sum(np.abs(m) ** 2))


def test_esr_sum_rule_matches_block_trace(sysp, sol1, rng):
    for _ in range(20):
        mw = MicrowaveField.along(rng.normal(size=3), sysp)
        levels = solve(sysp, sol1, FieldOrientation(B_MT, rng.uniform(0, 180), rng.uniform(0, 360)))
        total = sum(l.amplitude for l in esr_lines(levels, mw))
        assert total == pytest.approx(_block_strength(levels, mw), rel=1e-10)


def _phi_spread(sys, mw, theta, b):
    totals = [
        sum(l.amplitude for l in esr_lines(solve(sys, ZERO_TENSOR, FieldOrientation(b, theta, phi)), mw))
        for phi in np.arange(0, 360, 15)
    ]
    return np.ptp(totals) / np.mean(totals)


def test_esr_sum_rule_phi_invariance_uncoupled(sys0, rng):
    axial = MicrowaveField((0.0, 0.0, 1.0))
    for _ in range(10):
        theta = rng.uniform(10, 170)
        assert _phi_spread(sys0, axial, theta, B_MT) < 1e-8
        # a transverse drive sees the field-induced mS = 0 mixing, second order in B / D
        general = MicrowaveField(tuple(random_unit(rng)))
        full, half = _phi_spread(sys0, general, theta, B_MT), _phi_spread(sys0, general, theta, B_MT / 2)
        assert full < 10 * (GAMMA_E_B / D_ZFS) ** 2
        assert 3.0 < full / half < 5.0


def test_esr_sum_rule_value_axial(sys0):
    mw = MicrowaveField((1.0, 0.0, 0.0))
    levels = solve(sys0, ZERO_TENSOR, FieldOrientation(B_MT, 0, 0))
    # |<0|Sx|+-1>|^2 = 1/2, two mS=0 states, two targets each
    assert sum(l.amplitude for l in esr_lines(levels, mw)) == pytest.approx(2.0)


def test_amplitude_mirror_symmetry(sysp, sol1, rng):
    for _ in range(20):
        mw = MicrowaveField.along(rng.normal(size=3), sysp)
        theta, phi = rng.uniform(5, 175), rng.uniform(0, 360)
        a = spectrum(sysp, sol1, FieldOrientation(B_MT, theta, phi), mw)
        b = spectrum(sysp, sol1, FieldOrientation(B_MT, theta, -phi), mw.reflected())
        assert np.allclose([l.amplitude for l in a], [l.amplitude for l in b], atol=1e-9)
        assert np.allclose([l.freq for l in a], [l.freq for l in b], atol=1e-9)


def test_zero_pair_ambiguity_raises():
    levels = solve(SpinSystemParams(d_zfs=0.0), ZERO_TENSOR, FieldOrientation(50.0, 90.0, 0.0))
    with pytest.raises(LabelError):
        zq_frequency_exact(levels)


def test_microwave_direction_validation():
    with pytest.raises(ValueError):
        MicrowaveField((1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        MicrowaveField.along([0, 0, 0])


def test_rabi_ratio_spectator(sys0):
    levels = solve(sys0, ZERO_TENSOR, FieldOrientation(B_MT, 0, 0))
    mw = MicrowaveField((1.0, 0.0, 0.0))
    for upper in [(1, 0), (1, 1), (-1, 0), (-1, 1)]:
        r = rabi_ratio(levels, mw, upper)
        # one allowed and one forbidden line: the moments are 1/sqrt(2) and 0
        assert r.ratio == np.inf
        assert max(r.moments) == pytest.approx(np.sqrt(0.5))


def test_rabi_ratio_distinguishes_sign_solutions(sysp, mw_x):
    """Mean Rabi ratio at B || z separates solution 1 from solution 3."""
    stats = {}
    for key in (1, 3):
        levels = solve(sysp, SOL[key], FieldOrientation(B_MT, 0, 0))
        ratios = [rabi_ratio(levels, mw_x, (m, b)).ratio for m in (1, -1) for b in (0, 1)]
        assert all(np.isfinite(ratios))
        stats[key] = np.mean(ratios)
    assert stats[1] > 1.15 * stats[3]


def test_rabi_ratio_rejects_zero_state(sysp, sol1, mw_x):
    with pytest.raises(ValueError):
        rabi_ratio(solve(sysp, sol1, FieldOrientation(B_MT, 0, 0)), mw_x, (0, 1))


def test_profile_phase_pattern(sysp, sol1, mw_x):
    phi = np.arange(0, 180, 2.0)
    prof = amplitude_ratio_profile(sysp, sol1, 90.0, mw_x, phi, B_MT)
    i = prof.intensities
    assert np.corrcoef(i[:, 0], i[:, 3])[0, 1] > 0.99
    assert abs(phi[np.argmax(i[:, 1])] - phi[np.argmax(i[:, 0])]) == pytest.approx(90, abs=10)


def test_profile_uncoupled_axial_drive(sysp):
    # with the drive along the symmetry axis nothing depends on phi
    mw = MicrowaveField((0.0, 0.0, 1.0))
    prof = amplitude_ratio_profile(sysp, ZERO_TENSOR, 80.0, mw, np.arange(0, 360, 15), B_MT)
    assert np.allclose(prof.intensities, prof.intensities[0], rtol=1e-6)


def test_profile_flags_crossings(sysp):
    mw = MicrowaveField((1.0, 0.0, 0.0))
    prof = amplitude_ratio_profile(SpinSystemParams(gamma_n=0), ZERO_TENSOR, 80.0, mw, [0.0, 30.0], B_MT)
    assert prof.crossing.all()


def test_synthetic_noiseless_exact(sysp, sol1, mw_x):
    ors = orientation_grid(B_MT)
    syn = synth_dataset(sysp, sol1, ors, mw_x, (0.0, 0.0), 1)
    for o, recs in syn.records:
        exact = [l.freq for l in spectrum(sysp, sol1, o, mw_x)]
        assert [r[1] for r in recs] == exact


def test_synthetic_determinism(sysp, sol1, mw_x):
    ors = orientation_grid(B_MT)
    a = synth_dataset(sysp, sol1, ors, mw_x, (0.6, 0.06), 5)
    b = synth_dataset(sysp, sol1, ors, mw_x, (0.6, 0.06), 5)
    c = synth_dataset(sysp, sol1, ors, mw_x, (0.6, 0.06), 6)
    assert a.records == b.records
    assert a.records != c.records


def test_synthetic_noise_level(sysp, sol1, mw_x):
    ors = orientation_grid(B_MT, thetas=(30, 60), phis=tuple(range(0, 360, 30)))
    clean = synth_dataset(sysp, sol1, ors, mw_x, (0, 0), 0)
    noisy = synth_dataset(sysp, sol1, ors, mw_x, (0.6, 0.06), 0)
    d_esr, d_zq = [], []
    for (_, r0), (_, r1) in zip(clean.records, noisy.records):
        for x, y in zip(r0, r1):
            (d_esr if x[0] == ESR else d_zq).append(y[1] - x[1])
    assert np.std(d_esr) == pytest.approx(0.3, rel=0.15)
    assert np.std(d_zq) == pytest.approx(0.03, rel=0.3)


def test_synthetic_rejects_empty(sysp, sol1, mw_x):
    with pytest.raises(ValueError):
        synth_dataset(sysp, sol1, [], mw_x, (0.6, 0.06), 0)
