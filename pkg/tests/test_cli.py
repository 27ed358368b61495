import json

import numpy as np
import pytest

from nvc13.cli import EXIT_CONVERGENCE, EXIT_DATA, EXIT_USAGE, main
from nvc13.fitting import fit_zq_linear
from nvc13.io import data_path, load_dataset, save_dataset

from conftest import B_MT, GAMMA_E_B
from helpers import bare_lab_dataset

BUNDLED = str(data_path("sol1"))


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def result(tmp_path, name):
    return json.loads((tmp_path / f"{name}.json").read_text())


def test_pas_report(tmp_path):
    assert run(tmp_path, "pas") == 0
    text = (tmp_path / "pas.txt").read_text()
    assert "120.463, 128.400, 197.737" in text and "109.30" in text
    r = result(tmp_path, "pas")
    assert np.allclose(r["result"]["values"], [120.5, 128.4, 197.8], atol=0.1)
    assert "config" in r and r["constants"]["d_zfs_MHz"] == 2870.2


def test_zq_table_fits_reference(tmp_path):
    assert run(tmp_path, "zq", "--theta", "84.5") == 0
    rows = np.genfromtxt(tmp_path / "zq.csv", delimiter=",", names=True)
    fit = fit_zq_linear(rows["phi_deg"], rows["exact_MHz"])
    assert fit.kappa1 == pytest.approx(8.5, rel=0.01)
    assert fit.kappa2 == pytest.approx(5.88, rel=0.01)


def test_simulate_uncoupled(tmp_path):
    assert run(tmp_path, "simulate", "--tensor", "0", "0", "0", "0", "--theta", "0", "--gamma-n-zero") == 0
    got = result(tmp_path, "simulate")["result"]["distinct_esr_MHz"]
    assert got == pytest.approx([2870.2 - GAMMA_E_B, 2870.2 + GAMMA_E_B], abs=1e-6)


def test_amplitudes_and_classify(tmp_path):
    assert run(tmp_path, "amplitudes") == 0
    assert result(tmp_path, "amplitudes")["result"]["verdict"] == "positive"
    assert (tmp_path / "amplitudes.csv").read_text().startswith("phi_deg,f1_MHz")
    assert run(tmp_path, "classify-det", "--tensor", "189.3", "-128.4", "128.9", "24.1") == 0
    assert result(tmp_path, "classify-det")["result"]["verdict"] == "negative"
    assert run(tmp_path, "classify-det", "--data", BUNDLED) == 0
    assert result(tmp_path, "classify-det")["result"]["r01"]["verdict"] == "positive"


def test_equiv(tmp_path):
    assert run(tmp_path, "equiv") == 0
    r = result(tmp_path, "equiv")["result"]
    assert r["max_deviation_MHz"] < 1e-6
    assert np.allclose(r["solutions"]["pi_x"], [-163.0, -128.4, 85.7, -99.3], atol=0.3)


def test_fit_commands_on_bundled_data(tmp_path):
    assert run(tmp_path, "fit-zq", "--data", BUNDLED) == 0
    assert "84.5" in result(tmp_path, "fit-zq")["result"]
    assert run(tmp_path, "fit-amplitudes", "--data", BUNDLED) == 0
    assert result(tmp_path, "fit-amplitudes")["result"]["r01"]["resolved"]
    assert run(tmp_path, "fit-full", "--data", BUNDLED) == 0
    r = result(tmp_path, "fit-full")["result"]
    assert r["notes"][0].startswith("det > 0")
    assert np.allclose(r["candidates"][0]["tensor"], [189.3, 128.4, 128.9, 24.1], atol=3.0)


def test_fit_orientation_command(tmp_path):
    save_dataset(bare_lab_dataset(B_MT), tmp_path / "bare")
    assert run(tmp_path, "fit-orientation", "--data", str(tmp_path / "bare")) == 0
    r = result(tmp_path, "fit-orientation")["result"]["orientation"]
    assert r["d_zfs"] == pytest.approx(2870.2, abs=1e-3)


def test_gen_synthetic_round_trip_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["gen-synthetic", "--seed", "11", "--out", str(a)]) == 0
    assert main(["gen-synthetic", "--seed", "11", "--out", str(b)]) == 0
    for name in ("orientations.csv", "lines.csv", "gen-synthetic.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ds = load_dataset(a)
    assert len(ds.lines) == 108 and ds.comment.startswith("SYNTHETIC")


def test_fit_output_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit-full", "--data", BUNDLED, "--seed", "2", "--out", str(a)]) == 0
    assert main(["fit-full", "--data", BUNDLED, "--seed", "2", "--out", str(b)]) == 0
    assert (a / "fit-full.json").read_bytes() == (b / "fit-full.json").read_bytes()
    assert (a / "fit_full_candidates.csv").read_bytes() == (b / "fit_full_candidates.csv").read_bytes()


def test_lab_frame_pipeline(tmp_path):
    d = tmp_path / "lab"
    assert main(["gen-synthetic", "--seed", "3", "--frame", "lab", "--axis", "30", "40", "10", "--out", str(d)]) == 0
    assert run(tmp_path, "fit-full", "--data", str(d), "--det-sign", "pos") == 0
    r = result(tmp_path, "fit-full")["result"]
    xz = [c["tensor"][3] for c in r["candidates"] if c["transform"] == "identity"]
    assert any(v > 0 for v in xz) and any(v < 0 for v in xz)


def test_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as err:
        main(["fit-full", "--bogus"])
    assert err.value.code == EXIT_USAGE
    assert run(tmp_path, "fit-full") == EXIT_USAGE
    (tmp_path / "c.json").write_text('{"fit": {"xtol": -1}}')
    assert run(tmp_path, "pas", "--config", str(tmp_path / "c.json")) == EXIT_USAGE
    (tmp_path / "o.csv").write_text("orient_id,frame,angle1_deg,angle2_deg,b_mT\na,nv,1,2,3\n")
    (tmp_path / "l.csv").write_text("orient_id,kind,freq_MHz,sigma_MHz\na,esr,2800,0\n")
    code = run(tmp_path, "fit-full", "--orientations", str(tmp_path / "o.csv"), "--lines", str(tmp_path / "l.csv"))
    assert code == EXIT_DATA
    assert "l.csv:2" in capsys.readouterr().err


def test_non_convergence_exit(tmp_path):
    d = tmp_path / "flat"
    d.mkdir()
    (d / "orientations.csv").write_text("orient_id,frame,angle1_deg,angle2_deg,b_mT\nr,nv,90,0,2.2\n")
    rows = "".join(f"r,{p},3.0,0.1\n" for p in range(-40, 41, 5))
    (d / "ratios.csv").write_text("orient_id,phi_deg,ratio,sigma\n" + rows)
    (d / "lines.csv").write_text("orient_id,kind,freq_MHz,sigma_MHz\n")
    assert run(tmp_path, "fit-amplitudes", "--data", str(d)) == EXIT_CONVERGENCE


def test_coplanar_is_data_error(tmp_path):
    plane = [(90, p) for p in range(0, 360, 40)]
    save_dataset(bare_lab_dataset(B_MT, directions=plane), tmp_path / "plane")
    assert run(tmp_path, "fit-orientation", "--data", str(tmp_path / "plane")) == EXIT_DATA
