import csv

import numpy as np
import pytest

from qfbcool.cli import CSV_HEADER, main
from qfbcool.config import defaults, emit_config, parse_config, parse_config_text
from qfbcool.errors import InvalidGamma, MissingRequired, TypeMismatch, UnknownKey

SMALL_RUN = """\
preset = qutrit
controller = {kind}

[ensemble]
n_initial = 4
runs_per_initial = 2
T = 0.3
dt = 1e-3
sample_every = 40
master_seed = 11
{extra}
"""


class TestConfig:
    def test_minimal_file_gets_defaults(self, tmp_path, qutrit):
        p = tmp_path / "run.ini"
        p.write_text("preset = qutrit\ncontroller = ideal\n")
        cfg = parse_config(p)
        assert cfg["model"]["preset"] == "qutrit"
        assert cfg["controller"]["kind"] == "ideal"
        assert cfg["ensemble"]["dt"] == 1e-4
        assert cfg["ensemble"]["n_initial"] == 1000
        assert cfg["ensemble"]["runs_per_initial"] == 20
        assert cfg.resolved(qutrit)["controller"]["gamma"] == 1.5
        assert cfg.resolved(qutrit)["controller"]["epsilon"] == 3.0

    def test_sections_and_overrides(self):
        text = "[model]\npreset = heisenberg\njz = 1.5\n[controller]\nkind = windowed\nwindow_k = 200\n"
        cfg = parse_config_text(text, {("controller", "window_k"): "300", ("ensemble", "T"): 2.0})
        assert cfg["model"]["jz"] == 1.5
        assert cfg["controller"]["window_k"] == 300
        assert cfg["ensemble"]["T"] == 2.0

    def test_gamma_out_of_range(self, qutrit):
        cfg = parse_config_text("preset = qutrit\ncontroller = ideal\n[controller]\ngamma = 5.0\n")
        with pytest.raises(InvalidGamma):
            cfg.resolved(qutrit)

    def test_round_trip(self):
        cfg = parse_config_text(
            "preset = heisenberg\n[controller]\nkind = windowed\ngamma = 2.5\n"
            "[ensemble]\ndt = 3.3e-4\ninit_scheme = fixed\ninit_diag = 0.5, 0.25, 0.25\n[output]\nplot_stub = yes\n"
        )
        again = parse_config_text(emit_config(cfg))
        assert again == cfg
        assert parse_config_text(emit_config(defaults()), check_required=False) == defaults()

    @pytest.mark.parametrize(
        "text, exc",
        [
            ("preset = qutrit\ncontroller = ideal\n[ensemble]\nhorizon = 3\n", UnknownKey),
            ("preset = qutrit\ncontroller = ideal\n[plots]\nx = 1\n", UnknownKey),
            ("preset = qutrit\ncontroller = ideal\nseed = 1\n", UnknownKey),
            ("preset = qutrit\ncontroller = ideal\n[ensemble]\nn_initial = many\n", TypeMismatch),
            ("preset = qutrit\ncontroller = bang\n", TypeMismatch),
            ("preset = ring\ncontroller = ideal\n", TypeMismatch),
            ("controller = ideal\n", MissingRequired),
            ("preset = qutrit\n", MissingRequired),
        ],
    )
    def test_errors(self, text, exc):
        with pytest.raises(exc):
            parse_config_text(text)

    def test_fixed_needs_diag(self):
        cfg = parse_config_text("preset = qutrit\ncontroller = free\n[ensemble]\ninit_scheme = fixed\n")
        with pytest.raises(MissingRequired):
            cfg.to_ensemble_config()


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run_sim(tmp_path, name, kind="ideal", extra="", flags=()):
    cfg = tmp_path / f"{name}.ini"
    cfg.write_text(SMALL_RUN.format(kind=kind, extra=extra))
    out = tmp_path / name
    code = main(["simulate", "--config", str(cfg), "--out", str(out), *flags])
    return code, out


class TestSimulate:
    def test_csv_layout(self, tmp_path):
        code, out = run_sim(tmp_path, "a")
        assert code == 0
        header, data = read_csv(out / "ensemble.csv")
        assert header == CSV_HEADER
        assert data.shape == (int(0.3 / (1e-3 * 40)) + 1, 5)
        np.testing.assert_allclose(data[:, 0], np.arange(8) * 0.04)
        text = (out / "ensemble.csv").read_text().splitlines()[1]
        assert all(len(v.split("e")[0].replace(".", "").lstrip("-")) >= 12 for v in text.split(",") if v != "nan")

    def test_free_ground_state_all_ones(self, tmp_path):
        code, out = run_sim(tmp_path, "f", kind="free", extra="init_scheme = fixed\ninit_diag = 1, 0, 0")
        assert code == 0
        _, data = read_csv(out / "ensemble.csv")
        np.testing.assert_array_equal(data[:, 1], 1.0)
        np.testing.assert_array_equal(data[:, 4], 0.0)

    def test_byte_identical_reruns(self, tmp_path):
        _, a = run_sim(tmp_path, "r1", kind="windowed", flags=("--window-k", "50"))
        _, b = run_sim(tmp_path, "r2", kind="windowed", flags=("--window-k", "50", "--workers", "2", "--batch-size", "3"))
        assert (a / "ensemble.csv").read_bytes() == (b / "ensemble.csv").read_bytes()

    def test_resolved_config_written(self, tmp_path):
        _, out = run_sim(tmp_path, "c", kind="ergodic", flags=("--gamma", "1.0"))
        cfg = parse_config(out / "config.ini")
        assert cfg["controller"]["gamma"] == 1.0
        assert cfg["controller"]["epsilon"] == 3.0
        assert cfg["controller"]["kind"] == "ergodic"
        assert cfg["output"]["dir"] == str(out)

    def test_trajectory_dump_and_plot_stub(self, tmp_path):
        _, out = run_sim(tmp_path, "d", flags=("--dump-trajectories", "--plot-stub"))
        files = sorted(p.name for p in (out / "trajectories").iterdir())
        assert len(files) == 8 and "traj_3_1.csv" in files
        header, data = read_csv(out / "trajectories" / "traj_0_0.csv")
        assert header == ["t", "fidelity", "x_true", "x_estimate", "control", "y_cumulative"]
        assert set(data[:, 4]) <= {0.0, 1.0}
        assert (out / "plot.gp").exists()

    def test_ideal_beats_free(self, tmp_path):
        flags = ("--T", "3", "--n-initial", "20")
        _, ideal = run_sim(tmp_path, "i", kind="ideal", flags=flags)
        _, free = run_sim(tmp_path, "fr", kind="free", flags=flags)
        assert read_csv(ideal / "ensemble.csv")[1][-1, 1] > read_csv(free / "ensemble.csv")[1][-1, 1]

    def test_invalid_gamma_exit_code(self, tmp_path, capsys):
        code, _ = run_sim(tmp_path, "g", extra="", flags=("--gamma", "5.0"))
        assert code == 1
        assert "InvalidGamma" in capsys.readouterr().err

    def test_unknown_key_exit_code(self, tmp_path, capsys):
        code, _ = run_sim(tmp_path, "u", extra="bogus = 1")
        assert code == 1
        assert "UnknownKey" in capsys.readouterr().err

    def test_assumption_violation_exit_code(self, tmp_path):
        code, _ = run_sim(tmp_path, "z", flags=("--f0", "zero"))
        assert code == 1

    def test_runtime_error_exit_code(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("")
        cfg = tmp_path / "x.ini"
        cfg.write_text(SMALL_RUN.format(kind="free", extra=""))
        assert main(["simulate", "--config", str(cfg), "--out", str(blocker / "out")]) == 2
        assert "error:" in capsys.readouterr().err


class TestVerifyAndPreset:
    def test_verify_qutrit(self, capsys):
        assert main(["verify", "qutrit"]) == 0
        out = capsys.readouterr().out
        assert "liouvillian rank: 8 of 9" in out
        assert "witness: PASS" in out

    def test_verify_heisenberg(self, capsys):
        assert main(["verify", "heisenberg"]) == 0
        out = capsys.readouterr().out
        assert "target multiplicity: 4" in out
        assert "liouvillian rank: 63 of 64" in out

    def test_verify_without_feedback_fails(self, capsys):
        assert main(["verify", "qutrit", "--f0", "zero"]) == 1
        assert "unique_equilibrium: FAIL" in capsys.readouterr().out

    def test_preset_list(self, capsys):
        assert main(["preset", "list"]) == 0
        out = capsys.readouterr().out
        assert "qutrit:" in out and "heisenberg:" in out

    def test_preset_heisenberg_params(self, capsys):
        assert main(["preset", "heisenberg", "--jz", "1"]) == 0
        assert "multiplicities: 4, 4" in capsys.readouterr().out
