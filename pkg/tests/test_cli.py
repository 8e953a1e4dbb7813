"""End-to-end checks of the command-line runner: exit codes, output layout,
byte-level determinism, and the verify hooks."""

import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from jjring import cli


def write_config(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def run_main(config, out, *extra):
    return cli.main(["--config", config, "--out", str(out), *extra])


EFFECTIVE_INI = """
[run]
experiment = effective
seed = 7

[effective]
omega_r = 5
g = 0.25
n_points = 120
"""

SPECTRUM_TINY = """
[run]
experiment = spectrum

[spectrum]
n_points = 5
ratios = 10
levels = 2
l = 24
"""

LINDBLAD_SHORT = """
[run]
experiment = lindblad

[lindblad]
n_max = 2
t_final = 6
dt = 0.5
n_samples = 6
"""


def only_run_dir(out, experiment):
    dirs = list((Path(out) / experiment).iterdir())
    assert len(dirs) == 1
    return dirs[0]


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(x) for x in row] for row in reader]
    return header, np.array(rows)


class TestConfigErrors:
    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[run]\nexperiment = effective\n\n[effective]\nbogus = 1\n")
        assert run_main(cfg, tmp_path / "out") == 2
        assert "effective.bogus" in capsys.readouterr().err

    def test_unknown_section(self, tmp_path):
        cfg = write_config(tmp_path, "[run]\nexperiment = effective\n\n[smatrix]\nomega_r = 5\n")
        assert run_main(cfg, tmp_path / "out") == 2

    def test_unknown_experiment(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[run]\nexperiment = banana\n")
        assert run_main(cfg, tmp_path / "out") == 2
        assert "banana" in capsys.readouterr().err

    def test_bad_value(self, tmp_path):
        cfg = write_config(tmp_path, "[run]\nexperiment = smatrix\n\n[smatrix]\nn_points = soon\n")
        assert run_main(cfg, tmp_path / "out") == 2

    def test_bad_choice(self, tmp_path):
        cfg = write_config(tmp_path, "[run]\nexperiment = smatrix\n\n[smatrix]\nchirality = 2\n")
        assert run_main(cfg, tmp_path / "out") == 2

    def test_missing_file(self, tmp_path):
        assert run_main(str(tmp_path / "absent.ini"), tmp_path / "out") == 2

    def test_missing_run_section(self, tmp_path):
        cfg = write_config(tmp_path, "[effective]\nomega_r = 5\n")
        assert run_main(cfg, tmp_path / "out") == 2

    def test_model_validation_maps_to_config_error(self, tmp_path):
        # e_j <= 0 is rejected by the parameter class, not the schema
        cfg = write_config(tmp_path, "[run]\nexperiment = quench\n\n[quench]\ne_j = -3\n")
        assert run_main(cfg, tmp_path / "out") == 2

    def test_oversized_truncation_rejected(self, tmp_path):
        cfg = write_config(tmp_path, "[run]\nexperiment = lindblad\n\n[lindblad]\nn_max = 9\n")
        assert run_main(cfg, tmp_path / "out") == 2


class TestNumericalFailure:
    def test_coarse_step_positivity_exits_3(self, tmp_path, capsys):
        # stiff ring Hamiltonian and a step the integrator cannot hold
        cfg = write_config(tmp_path, """
[run]
experiment = lindblad

[lindblad]
n_max = 2
hamiltonian = ring
e_n = 8
e_j = 3
gamma = 0.8
dt = 0.4
t_final = 4
""")
        assert run_main(cfg, tmp_path / "out") == 3
        assert "positivity" in capsys.readouterr().err


class TestLayout:
    def test_effective_outputs(self, tmp_path):
        cfg = write_config(tmp_path, EFFECTIVE_INI)
        assert run_main(cfg, tmp_path / "out") == 0
        run_dir = only_run_dir(tmp_path / "out", "effective")
        meta = json.loads((run_dir / "meta.json").read_text())
        assert meta["config_hash"] == run_dir.name
        assert meta["experiment"] == "effective"
        assert meta["seed"] == 7
        assert meta["results"]["period"] == pytest.approx(2 * math.pi / 0.75)
        for name in meta["figures"]:
            assert (run_dir / name).is_file()
        assert meta["figures"]

        header, rows = read_rows(run_dir / "data.csv")
        assert header == ["t", "p_a", "p_b", "p_c"]
        assert rows.shape == (120, 4)
        assert np.allclose(rows[:, 1:].sum(axis=1), 1.0, atol=1e-10)

    def test_plots_opt_out(self, tmp_path):
        cfg = write_config(tmp_path, EFFECTIVE_INI.replace("seed = 7", "seed = 7\nplots = false"))
        assert run_main(cfg, tmp_path / "out") == 0
        run_dir = only_run_dir(tmp_path / "out", "effective")
        assert json.loads((run_dir / "meta.json").read_text())["figures"] == []
        assert not list(run_dir.glob("*.png"))

    def test_seed_override_changes_directory(self, tmp_path):
        cfg = write_config(tmp_path, EFFECTIVE_INI)
        assert run_main(cfg, tmp_path / "out") == 0
        assert run_main(cfg, tmp_path / "out", "--seed", "11") == 0
        dirs = list((tmp_path / "out" / "effective").iterdir())
        assert len(dirs) == 2

    def test_hash_mismatch_refused(self, tmp_path):
        cfg = write_config(tmp_path, EFFECTIVE_INI)
        assert run_main(cfg, tmp_path / "out") == 0
        run_dir = only_run_dir(tmp_path / "out", "effective")
        meta = json.loads((run_dir / "meta.json").read_text())
        meta["config_hash"] = "0" * 12
        (run_dir / "meta.json").write_text(json.dumps(meta))
        assert run_main(cfg, tmp_path / "out") == 2


class TestDeterminism:
    def test_rerun_reproduces_bytes(self, tmp_path):
        cfg = write_config(tmp_path, EFFECTIVE_INI)
        assert run_main(cfg, tmp_path / "a") == 0
        assert run_main(cfg, tmp_path / "b") == 0
        a = only_run_dir(tmp_path / "a", "effective") / "data.csv"
        b = only_run_dir(tmp_path / "b", "effective") / "data.csv"
        assert a.read_bytes() == b.read_bytes()

    def test_thread_count_does_not_change_bytes(self, tmp_path):
        cfg = write_config(tmp_path, SPECTRUM_TINY)
        assert run_main(cfg, tmp_path / "a", "--threads", "1") == 0
        assert run_main(cfg, tmp_path / "b", "--threads", "3") == 0
        a = only_run_dir(tmp_path / "a", "spectrum") / "data.csv"
        b = only_run_dir(tmp_path / "b", "spectrum") / "data.csv"
        assert a.read_bytes() == b.read_bytes()
        # same hash: threads stay out of the config digest
        assert a.parent.name == b.parent.name


class TestExperimentOutputs:
    def test_quench_meta(self, tmp_path):
        cfg = write_config(tmp_path, "[run]\nexperiment = quench\n\n[quench]\nratio = 25\n")
        assert run_main(cfg, tmp_path / "out") == 0
        run_dir = only_run_dir(tmp_path / "out", "quench")
        meta = json.loads((run_dir / "meta.json").read_text())
        res = meta["results"]
        assert res["tau"] is not None and 0 < res["tau"] < res["t_final"]
        assert res["initial_current"] > 2.0
        header, rows = read_rows(run_dir / "data.csv")
        assert header == ["t", "current", "norm", "energy"]
        assert np.allclose(rows[:, 2], 1.0, atol=1e-8)

    def test_smatrix_columns_and_closed_form(self, tmp_path):
        cfg = write_config(tmp_path, "[run]\nexperiment = smatrix\n\n[smatrix]\nn_points = 101\n")
        assert run_main(cfg, tmp_path / "out", "--verify") == 0
        run_dir = only_run_dir(tmp_path / "out", "smatrix")
        header, rows = read_rows(run_dir / "data.csv")
        assert header[:5] == ["omega", "p11", "p21", "p31", "p12"]
        cols = dict(zip(header, rows.T))
        assert np.abs(cols["p3_minus"] - cols["lorentzian_product"]).max() < 1e-12
        assert cols["unitarity_residual"].max() < 1e-12
        meta = json.loads((run_dir / "meta.json").read_text())
        assert "verify" in meta["results"]

    def test_lindblad_columns_and_overlap(self, tmp_path):
        cfg = write_config(tmp_path, LINDBLAD_SHORT)
        assert run_main(cfg, tmp_path / "out") == 0
        run_dir = only_run_dir(tmp_path / "out", "lindblad")
        header, rows = read_rows(run_dir / "data.csv")
        sectors = 6 * 2 + 1
        assert len(header) == 3 + 2 * sectors
        assert header[3] == "pop_-6" and header[3 + sectors] == "chi_-6"
        meta = json.loads((run_dir / "meta.json").read_text())
        res = meta["results"]
        assert res["min_phase_overlap"] >= 1 - 1e-6
        assert res["final_trace_defect"] < 1e-8
        # all sector populations sum to the trace at every sample
        assert np.allclose(rows[:, 3:3 + sectors].sum(axis=1), rows[:, 1], atol=1e-10)

    def test_halflife_scan_fit(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[run]\nexperiment = halflife-scan\n\n[halflife-scan]\nratios = 25, 50, 100\n")
        assert run_main(cfg, tmp_path / "out", "--threads", "3") == 0
        run_dir = only_run_dir(tmp_path / "out", "halflife-scan")
        meta = json.loads((run_dir / "meta.json").read_text())
        assert 0.5 < meta["results"]["alpha"] < 0.8
        header, rows = read_rows(run_dir / "data.csv")
        assert header == ["ratio", "l", "tau"]
        assert (np.diff(rows[:, 2]) > 0).all()

    def test_continuum_scan_reports_l_star(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "[run]\nexperiment = continuum-scan\n\n"
            "[continuum-scan]\nratio = 50\nl_values = 36, 42, 48\n")
        assert run_main(cfg, tmp_path / "out") == 0
        run_dir = only_run_dir(tmp_path / "out", "continuum-scan")
        meta = json.loads((run_dir / "meta.json").read_text())
        assert meta["results"]["l_star"] in (36, 42)
        header, rows = read_rows(run_dir / "data.csv")
        assert header == ["l", "tau", "deviation"]
        assert math.isnan(rows[-1, 2])  # no successor grid to compare against


class TestVerifyHooks:
    def test_effective_verify_passes(self, tmp_path):
        cfg = write_config(tmp_path, EFFECTIVE_INI)
        assert run_main(cfg, tmp_path / "out", "--verify") == 0
        run_dir = only_run_dir(tmp_path / "out", "effective")
        rep = json.loads((run_dir / "meta.json").read_text())["results"]["verify"]
        assert rep["eigenfrequency_dev"] < 1e-12

    def test_lindblad_verify_superoperator(self, tmp_path):
        cfg = write_config(tmp_path, LINDBLAD_SHORT)
        assert run_main(cfg, tmp_path / "out", "--verify") == 0
        run_dir = only_run_dir(tmp_path / "out", "lindblad")
        rep = json.loads((run_dir / "meta.json").read_text())["results"]["verify"]
        assert rep["superoperator_dev"] < 1e-6


def test_module_entry_point(tmp_path):
    cfg = Path(tmp_path / "run.ini")
    cfg.write_text(EFFECTIVE_INI)
    proc = subprocess.run(
        [sys.executable, "-m", "jjring.cli", "--config", str(cfg),
         "--out", str(tmp_path / "out")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "effective" in proc.stdout
