import json

import numpy as np
import pytest

from oqs_eom.commands import COMMANDS, run_command
from oqs_eom.config import Config
from oqs_eom.main import build_parser, main
from oqs_eom.persistence import load_record, payload_matrix

QB3 = "model:\n  catalog: QB3\n"


def _read_json(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def test_parser_knows_every_command():
    parser = build_parser()
    for name in COMMANDS:
        args = parser.parse_args([name, "--config", "x.yaml"])
        assert args.command == name
        assert args.format == "record"


def test_unknown_command_is_rejected():
    with pytest.raises(KeyError):
        run_command("explode", None)


# ================================================================================
# CATALOG
# ================================================================================

def test_catalog_listing(capsys):
    assert main(["catalog"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["payload"]["names"] == ["QB3", "GENERIC", "DECOUPLED", "DEGENERATE"]
    assert set(data["payload"]["models"]) == set(data["payload"]["names"])


def test_catalog_table(capsys):
    assert main(["catalog", "--format", "table"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "name,description"
    assert lines[1].startswith("QB3,")


def test_catalog_dump(write_config, tmp_path):
    out = tmp_path / "qb3.json"
    assert main(["catalog", "--config", write_config(QB3), "--out", str(out)]) == 0
    record = load_record(str(out))
    h = payload_matrix(record, "h_tot")
    assert h.shape == (6, 6)
    np.testing.assert_allclose(h, h.conj().T)
    assert record.model_name == "QB3"


# ================================================================================
# VERIFY
# ================================================================================

def test_verify_passes(write_config, tmp_path):
    out = tmp_path / "verify.json"
    path = write_config(QB3 + "initial:\n  kind: bell\nfrequencies:\n  count: 5\n")
    assert main(["verify", "--config", path, "--out", str(out)]) == 0
    data = _read_json(out)
    assert data["diagnostics"]["passed"] is True
    assert len(data["payload"]["z"]) == 5
    assert data["diagnostics"]["max_residual"] < 1e-8
    assert data["diagnostics"]["library_tolerances"] == Config.get_tolerances()


def test_verify_violation_still_writes_record(write_config, tmp_path):
    out = tmp_path / "verify.json"
    path = write_config(QB3 + "frequencies:\n  count: 3\ntolerances:\n  acceptance: 1.0e-30\n")
    assert main(["verify", "--config", path, "--out", str(out)]) == 4
    data = _read_json(out)
    assert data["diagnostics"]["passed"] is False
    assert any("resolvent residual" in w for w in data["warnings"])


def test_verify_table(write_config, tmp_path):
    out = tmp_path / "verify.csv"
    path = write_config(QB3 + "frequencies:\n  count: 4\n")
    assert main(["verify", "--config", path, "--format", "table", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("z.re,z.im,r_resolvent")
    assert len(lines) == 5


# ================================================================================
# ERRORS
# ================================================================================

def test_missing_config_file(tmp_path):
    assert main(["verify", "--config", str(tmp_path / "absent.yaml")]) == 2


def test_malformed_yaml(write_config):
    assert main(["verify", "--config", write_config("model: [QB3\n")]) == 2


def test_unknown_config_key(write_config):
    assert main(["verify", "--config", write_config(QB3 + "bogus: 1\n")]) == 2


def test_frequency_on_real_axis(write_config):
    assert main(["spectrum", "--config", write_config(QB3 + "spectrum_z: [0.0, 0.0]\n")]) == 3


def test_contour_violating_nyquist(write_config):
    text = QB3 + "times:\n  t_max: 10.0\n  count: 11\ncontour:\n  epsilon: 0.1\n  omega_max: 0.5\n  n_points: 1000\n"
    assert main(["evolve", "--config", write_config(text)]) == 3


def test_threads_must_be_positive(write_config):
    assert main(["verify", "--config", write_config(QB3), "--threads", "0"]) == 2


def test_table_unsupported_for_spectrum(write_config, tmp_path):
    out = tmp_path / "spectrum.csv"
    assert main(["spectrum", "--config", write_config(QB3), "--format", "table", "--out", str(out)]) == 2
    assert not out.exists()


# ================================================================================
# PIPELINES
# ================================================================================

def test_evolve_table(write_config, tmp_path):
    out = tmp_path / "evolve.csv"
    path = write_config(QB3 + "times:\n  t_max: 2.0\n  count: 5\n")
    assert main(["evolve", "--config", path, "--format", "table", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    assert header[0] == "t"
    assert "oracle[00].re" in header and "laplace[11].im" in header
    assert len(lines) == 6


def test_evolve_record(write_config, tmp_path):
    out = tmp_path / "evolve.json"
    path = write_config(QB3 + "initial:\n  kind: bell\ntimes:\n  t_max: 10.0\n  count: 21\n")
    assert main(["evolve", "--config", path, "--out", str(out), "--threads", "2"]) == 0
    record = load_record(str(out))
    oracle = payload_matrix(record, "oracle")
    laplace = payload_matrix(record, "inverse_laplace")
    assert oracle.shape == laplace.shape == (21, 2, 2)
    assert record.diagnostics["comparison"]["max_deviation"] == pytest.approx(np.max(np.abs(oracle - laplace)))
    assert record.diagnostics["contour_defaults"] == Config.get_contour_defaults()
    assert record.diagnostics["contour"]["n_points"] % 2 == 0


def test_freq_sweep_rows(write_config, tmp_path):
    out = tmp_path / "sweep.csv"
    path = write_config(QB3 + "frequencies:\n  re_min: -1.0\n  re_max: 1.0\n  count: 7\n  imag: 0.1\n")
    assert main(["freq-sweep", "--config", path, "--format", "table", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 8
    assert lines[0].split(",")[:2] == ["z.re", "z.im"]


def test_spectrum_record(write_config, tmp_path):
    out = tmp_path / "spectrum.json"
    path = write_config(QB3 + "spectrum_z: [0.0, 0.02]\n")
    assert main(["spectrum", "--config", path, "--out", str(out)]) == 0
    data = _read_json(out)
    assert data["diagnostics"]["zero_cluster"]["degeneracy"] == 1
    assert data["diagnostics"]["left_zero_mode_defect"] < 1e-10
    rho_inf = payload_matrix(load_record(str(out)), "rho_inf_candidate")
    assert np.trace(rho_inf).real == pytest.approx(1.0)


def test_longtime_sector_weights(write_config, tmp_path):
    out = tmp_path / "longtime.json"
    path = write_config("model:\n  catalog: DECOUPLED\n  seed: 3\nweights_list: [[0.5, 0.5], [0.2, 0.8]]\n")
    assert main(["longtime", "--config", path, "--out", str(out)]) == 0
    data = _read_json(out)
    results = data["payload"]["results"]
    assert len(results) == 2
    for entry in results:
        assert entry["comparisons"]["formula_vs_sector_oracle"]["within_tolerance"] is True
        assert entry["formula"]["degeneracy"] == 2
    assert data["diagnostics"]["trace_distance_first_two"] == pytest.approx(0.3, abs=1e-6)
    assert data["warnings"][0].startswith("finite environment")


def test_diagnose_timescales(write_config, tmp_path):
    out = tmp_path / "diagnose.json"
    assert main(["diagnose", "--config", write_config(QB3), "--out", str(out)]) == 0
    data = _read_json(out)
    assert {"t_PQ", "t_Q", "tau", "verdict"} <= set(data["diagnostics"]["timescales"])
    assert data["payload"]["heuristic"] is True


def test_diagnose_uncoupled_reports_infinity(write_config, tmp_path):
    out = tmp_path / "diagnose.json"
    assert main(["diagnose", "--config", write_config(QB3 + "  coupling_scale: 0.0\n"), "--out", str(out)]) == 0
    data = _read_json(out)
    assert data["payload"]["tau"] == "inf"
    assert data["payload"]["verdict"] == "uncoupled"


def test_records_are_reproducible(write_config, tmp_path):
    path = write_config(QB3 + "frequencies:\n  count: 3\n")
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--config", path, "--out", str(first)]) == 0
    assert main(["verify", "--config", path, "--out", str(second), "--threads", "3"]) == 0
    assert first.read_bytes() == second.read_bytes()
