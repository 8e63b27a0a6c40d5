import json

import numpy as np
import pytest

from erps import io
from erps.cli import main
from erps.state import Grid, build_gaussian


@pytest.fixture
def gaussian_file(tmp_path):
    path = tmp_path / "g.json"
    assert main(["state", "gaussian", "--q0", "0", "--p0", "2", "--sigma", "1", "--out", str(path)]) == 0
    return path


def test_state_gaussian(gaussian_file):
    state = io.read_state(gaussian_file)
    assert state.norm() == pytest.approx(1.0, abs=1e-12)
    assert state.grid.n_points == (2048,)


def test_bad_sigma_names_the_flag(tmp_path, capsys):
    assert main(["state", "gaussian", "--sigma", "-1", "--out", str(tmp_path / "x.json")]) == 2
    assert "--sigma" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_unknown_command_and_help(capsys):
    assert main(["frobnicate"]) == 2
    assert main(["--help"]) == 0


def test_superpose_normalizes_with_warning(tmp_path, capsys):
    out = tmp_path / "s.json"
    assert main(["state", "superpose", "--coeffs", "1,0.5+0.2j,0.1j", "--out", str(out)]) == 0
    assert "warning" in capsys.readouterr().err
    assert io.read_state(out).norm() == pytest.approx(1.0, abs=1e-12)


def test_sample_is_byte_identical(tmp_path, gaussian_file):
    outs = []
    for i, threads in enumerate(("1", "1", "3")):
        out = tmp_path / f"s{i}.csv"
        assert main(["sample", "--state", str(gaussian_file), "--shots", "1000", "--seed", "7",
                     "--threads", threads, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1] == outs[2]
    assert outs[0].splitlines()[0] == b"q,p,xi" and len(outs[0].splitlines()) == 1001
    assert main(["sample", "--state", str(gaussian_file), "--seed", str(2**64), "--out", str(tmp_path / "x")]) == 2


def test_verify_reports_heisenberg_row(gaussian_file, capsys, tmp_path):
    assert main(["verify", "--state", str(gaussian_file), "--out", str(tmp_path / "v.csv")]) == 0
    text = capsys.readouterr().out
    row = next(line for line in text.splitlines() if line.startswith("heisenberg_product_over_hbar"))
    assert float(row.split()[1]) == pytest.approx(0.5, rel=1e-6)
    assert "PASS" in row and "FAIL" not in text
    assert (tmp_path / "v.csv").read_text().startswith("check,value,tolerance,status")


def test_reconstruct_from_exact_weak_values(tmp_path, gaussian_file):
    wv = tmp_path / "wv.csv"
    assert main(["weakvalue", "--state", str(gaussian_file), "--out", str(wv)]) == 0
    report = tmp_path / "r.json"
    assert main(["reconstruct", "--weak", str(wv), "--truth", str(gaussian_file),
                 "--out", str(tmp_path / "rec.json"), "--report", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert set(doc) == {"fidelity", "n_masked", "regions", "noise_band"}
    assert doc["fidelity"] >= 1 - 1e-8


def test_reconstruct_reports_disconnected_domain(tmp_path):
    state = tmp_path / "s.json"
    assert main(["state", "superpose", "--coeffs", "1", "--levels", "1", "--n-points", "1025",
                 "--out", str(state)]) == 0
    wv = tmp_path / "wv.csv"
    assert main(["weakvalue", "--state", str(state), "--out", str(wv)]) == 0
    report = tmp_path / "r.json"
    assert main(["reconstruct", "--weak", str(wv), "--report", str(report), "--out", str(tmp_path / "o.json")]) == 1
    assert len(json.loads(report.read_text())["regions"]) == 2


def test_simulate_then_reconstruct(tmp_path):
    state = tmp_path / "g.json"
    io.write_state(state, build_gaussian(Grid.line(-10, 10, 1024), 1.0, 0.0, 0.5, 1.0))
    est = tmp_path / "est.csv"
    assert main(["simulate", "--state", str(state), "--shots", "200000", "--bins", "32", "--seed", "4",
                 "--out", str(est)]) == 0
    assert est.read_text().splitlines()[0] == "q,re_pw,im_pw,stderr_re,stderr_im,count"
    report = tmp_path / "r.json"
    assert main(["reconstruct", "--weak", str(est), "--truth", str(state), "--report", str(report),
                 "--out", str(tmp_path / "o.json")]) == 0
    doc = json.loads(report.read_text())
    assert doc["fidelity"] > 0.95 and doc["noise_band"] is not None


def test_simulate_without_coupling_is_a_usage_error(tmp_path, gaussian_file, capsys):
    assert main(["simulate", "--state", str(gaussian_file), "--g", "0", "--shots", "1000",
                 "--out", str(tmp_path / "e.csv")]) == 2
    assert "EmptyCalibration" in capsys.readouterr().err


def test_expect(gaussian_file, capsys):
    assert main(["expect", "--state", str(gaussian_file), "--poly-a", "1", "--poly-c", "0,0,1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "quantum,phase_space,deviation,passed"
    quantum, phase, _, ok = lines[1].split(",")
    assert float(quantum) == pytest.approx(4.25 + 1.0, rel=1e-9) and ok == "1"
    assert main(["expect", "--state", str(gaussian_file)]) == 2


def test_expect_independent_xi_fails_on_entangled(tmp_path, capsys):
    state = tmp_path / "c.json"
    assert main(["state", "correlated-gaussian", "--cov", "1,0.8,1", "--q-min", "-9", "--q-max", "9",
                 "--n-points", "96", "--out", str(state)]) == 0
    obs = tmp_path / "o.json"
    zeros = np.zeros((2, 96, 96)).tolist()
    obs.write_text(json.dumps({"A": zeros, "B": zeros, "C": np.zeros((96, 96)).tolist(),
                               "D": np.ones((96, 96)).tolist()}))
    assert main(["expect", "--state", str(state), "--observable", str(obs)]) == 0
    assert main(["expect", "--state", str(state), "--observable", str(obs), "--xi-mode", "independent"]) == 1


def test_trajectories_and_marginal(tmp_path, gaussian_file):
    tr = tmp_path / "t.csv"
    assert main(["trajectories", "--state", str(gaussian_file), "--steps", "20", "--count", "5",
                 "--dt", "0.01", "--out", str(tr)]) == 0
    lines = tr.read_text().splitlines()
    assert lines[0] == "t,q_1,q_2,q_3,q_4,q_5" and len(lines) == 22
    m = tmp_path / "m.csv"
    assert main(["marginal", "--state", str(gaussian_file), "--out", str(m)]) == 0
    data = np.loadtxt(m, delimiter=",", skiprows=1)
    assert np.trapezoid(data[:, 1], data[:, 0]) == pytest.approx(1.0, abs=1e-3)
    assert main(["marginal", "--state", str(gaussian_file), "--p-min", "1", "--p-max", "0",
                 "--out", str(m)]) == 2


def test_plot_writes_png_next_to_output(tmp_path):
    out = tmp_path / "g.json"
    assert main(["state", "gaussian", "--plot", "--out", str(out)]) == 0
    png = tmp_path / "g.png"
    assert png.read_bytes().startswith(b"\x89PNG")


def test_negative_values_with_equals(tmp_path):
    out = tmp_path / "g.json"
    assert main(["state", "gaussian", "--q0=-1.5", "--out", str(out)]) == 0
    assert io.read_state(out).position_moment(1) == pytest.approx(-1.5, abs=1e-10)
