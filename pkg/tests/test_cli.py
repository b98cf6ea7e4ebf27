import subprocess
import sys

import numpy as np
import pytest

from eit_entangle.cli import main
from eit_entangle.spectral import predict_negativity_damped, predict_negativity_pure


def _num(x):
    try:
        return float(x)
    except ValueError:
        return x


def read_csv(path):
    head, rows = {}, []
    cols = None
    for line in open(path, encoding="utf-8"):
        line = line.rstrip("\n")
        if line.startswith("#"):
            if " = " in line:
                k, v = line[2:].split(" = ", 1)
                head[k] = v
        elif cols is None:
            cols = line.split(",")
        else:
            rows.append([_num(x) for x in line.split(",")])
    return head, cols, np.array(rows, dtype=object if any(isinstance(v, str) for r in rows for v in r) else float)


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_evolve_peak(tmp_path):
    cfg = write(tmp_path, "solver = schrodinger\ngamma_mhz = 0\nn_initial = 3\nt_final_us = 300\n")
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 0
    head, cols, data = read_csv(tmp_path / "evolve.csv")
    assert cols[:9] == ["time_us", "negativity", "mean_n", "pop_e1", "pop_e2", "pop_e3",
                        "purity", "trace_error", "tail_population"]
    assert 0.5 <= data[:, 1].max() <= 0.55
    assert head["command"] == "evolve"


def test_spectrum_eta_zero_has_no_gap(tmp_path):
    cfg = write(tmp_path, "solver = schrodinger\neta = 0\nn_fock = 12\nscan_points = 11\n")
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 0
    head, cols, data = read_csv(tmp_path / "crossing.csv")
    assert data[0, cols.index("gap_mhz")] < 1e-10
    _, scols, sdata = read_csv(tmp_path / "spectrum.csv")
    assert sdata.shape == (11, 1 + 36)


def test_predict_is_the_formula(tmp_path):
    cfg = write(tmp_path, "solver = effective\ngap_mhz = 0.0019389\ngamma1_mhz = 0.001209\nt_final_us = 500\ndt_us = 2\n")
    assert main(["predict", "--config", cfg, "--out", str(tmp_path)]) == 0
    head, cols, data = read_csv(tmp_path / "predict.csv")
    t = data[:, 0]
    np.testing.assert_array_equal(data[:, 1], predict_negativity_pure(0.0019389, t))
    np.testing.assert_array_equal(data[:, 2], predict_negativity_damped(0.0019389, 0.001209, t))
    assert head["gap_source"] == "config"


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "eta = 0.1\n")
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("error[config]:") and "solver" in err
    assert "\n" not in err


def test_numerical_failure_exit_code(tmp_path, capsys):
    # n_initial close to the Fock edge leaks population into the tail
    cfg = write(tmp_path, "solver = schrodinger\nn_initial = 10\nn_fock = 12\nt_final_us = 300\ndt_us = 5\n")
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err.strip()
    assert err.startswith("error[tail-breach]:")
    assert not (tmp_path / "evolve.csv").exists()


def test_byte_identical_reruns(tmp_path):
    text = "solver = lindblad\ngamma_mhz = 1\nn_fock = 10\nt_final_us = 4\ndt_us = 1\n"
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        assert main(["evolve", "--config", write(tmp_path, text), "--out", str(d)]) == 0
        outs.append((d / "evolve.csv").read_bytes())
    assert outs[0] == outs[1]


def test_header_is_self_describing(tmp_path):
    cfg = write(tmp_path, "solver = effective\ngamma_mhz = 0.6\nt_final_us = 10\n")
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path)]) == 0
    head, _, _ = read_csv(tmp_path / "evolve.csv")
    for key in ("eta", "omega_mhz", "delta_mhz", "g1_mhz", "g2_mhz", "g_ratio", "gamma_mhz",
                "n_initial", "n_fock", "t_final_us", "dt_us", "solver", "gamma_rad_per_us"):
        assert key in head
    assert float(head["gamma_rad_per_us"]) == pytest.approx(2 * np.pi * 0.6)
    # the echoed settings parse back into the same run
    from eit_entangle.config import RunConfig
    import dataclasses
    names = {f.name for f in dataclasses.fields(RunConfig)}
    assert names <= set(head)


def test_steady_command(tmp_path):
    cfg = write(tmp_path, "solver = lindblad\ngamma_mhz = 0.6\nn_fock = 6\nsteady_method = kernel\n")
    assert main(["steady", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, cols, data = read_csv(tmp_path / "steady.csv")
    assert "negativity_inf" in cols


def test_sweep_command(tmp_path):
    cfg = write(tmp_path, "solver = effective\ngamma_mhz = 0.6\nt_final_us = 20\ndt_us = 2\n"
                          "scan_parameter = gamma_mhz\nscan_range = 0.2, 0.6\nscan_points = 3\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, cols, data = read_csv(tmp_path / "sweep_summary.csv")
    assert data.shape[0] == 3
    for k in range(3):
        assert (tmp_path / f"sweep_{k:03d}.csv").exists()


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, "solver = schrodinger\n")
    r = subprocess.run([sys.executable, "-m", "eit_entangle.cli", "bogus", "--config", cfg],
                       capture_output=True, text=True)
    assert r.returncode == 2
