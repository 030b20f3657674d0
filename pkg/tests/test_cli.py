"""Config parsing, CSV outputs, exit codes, environment overrides."""

import numpy as np
import pytest

from nscontact import ConfigError
from nscontact.cli import main, parse_config

BALL_CONFIG = """\
# elastic ball under gravity
scenario.kind = bouncing_ball
scenario.q0 = 0.3
scenario.v0 = 0
scenario.gravity = 9.81
scenario.restitution = 1.0
scheme.variant = moreau_jean
scheme.theta = 0.5
run.h = 1e-3
run.t_end = 0.5
"""


def write_config(tmp_path, text=BALL_CONFIG, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


class TestConfigParsing:
    def test_round_trip(self, tmp_path):
        cfg = parse_config(write_config(tmp_path))
        assert cfg.scenario_kind == "bouncing_ball"
        assert cfg.scheme_params["variant"] == "moreau_jean"
        assert cfg.h == pytest.approx(1e-3)
        assert cfg.scheme_spec().theta == 0.5

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = write_config(tmp_path, "scenario.kind = bouncing_ball\nrun.h 1e-3\n")
        with pytest.raises(ConfigError, match="line 2"):
            parse_config(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, BALL_CONFIG + "run.fancy = 1\n")
        with pytest.raises(ConfigError, match="fancy"):
            parse_config(path)

    def test_bad_number_rejected(self, tmp_path):
        path = write_config(tmp_path, BALL_CONFIG.replace("1e-3", "fast"))
        with pytest.raises(ConfigError, match="number"):
            parse_config(path)

    def test_missing_kind_rejected(self, tmp_path):
        path = write_config(tmp_path, "run.h = 1e-3\nrun.t_end = 1\n")
        with pytest.raises(ConfigError, match="scenario.kind"):
            parse_config(path)

    def test_scheme_variants_build(self, tmp_path):
        text = BALL_CONFIG.replace(
            "scheme.variant = moreau_jean\nscheme.theta = 0.5\n",
            "scheme.variant = generalized_alpha\nscheme.rho_infinity = 0.8\n")
        cfg = parse_config(write_config(tmp_path, text))
        spec = cfg.scheme_spec()
        assert spec.alpha_f == pytest.approx(0.8 / 1.8)

    def test_beta_rule_half_gamma(self, tmp_path):
        text = BALL_CONFIG.replace(
            "scheme.variant = moreau_jean\nscheme.theta = 0.5\n",
            "scheme.variant = newmark\nscheme.gamma = 0.8\nscheme.beta_rule = half_gamma\n")
        spec = parse_config(write_config(tmp_path, text)).scheme_spec()
        assert spec.beta == pytest.approx(0.4)


class TestSimulateCommand:
    def test_writes_csvs_and_exits_zero(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["simulate", cfg, "--out", str(out), "--audit"]) == 0
        header, rows = read_csv(out / "trajectory.csv")
        assert header == ["step", "t", "q_0", "v_0", "E", "H", "W_ext_cum",
                          "W_damp_cum", "contact_work", "residual", "active_set",
                          "penetration"]
        assert len(rows) == 500
        assert rows[0][0] == "1"
        header, rows = read_csv(out / "audit.csv")
        assert header[0:2] == ["step", "t"]
        assert all(row[-1] == "true" for row in rows)

    def test_seventeen_digit_round_trip(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        main(["simulate", cfg, "--out", str(out)])
        _, rows = read_csv(out / "trajectory.csv")
        q_vals = np.array([float(r[2]) for r in rows])
        # rerun and compare parsed values exactly
        out2 = tmp_path / "out2"
        main(["simulate", cfg, "--out", str(out2)])
        _, rows2 = read_csv(out2 / "trajectory.csv")
        q_vals2 = np.array([float(r[2]) for r in rows2])
        assert np.array_equal(q_vals, q_vals2)

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["simulate", cfg, "--out", str(out1)])
        main(["simulate", cfg, "--out", str(out2)])
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()
        assert (out1 / "audit.csv").read_bytes() == (out2 / "audit.csv").read_bytes()

    def test_condition_flag_false_without_failing(self, tmp_path):
        text = BALL_CONFIG.replace("scheme.theta = 0.5", "scheme.theta = 0.4")
        text = text.replace("scenario.restitution = 1.0", "scenario.restitution = 0.0")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["simulate", cfg, "--out", str(out), "--audit"]) == 0
        _, rows = read_csv(out / "audit.csv")
        cond_col = 5
        assert all(row[cond_col] == "false" for row in rows)

    def test_exit_two_when_tolerance_forced_to_zero(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NSC_TOL", "1e-30")
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["simulate", cfg, "--out", str(out), "--audit"]) == 2

    def test_exit_three_on_config_error(self, tmp_path, capsys):
        path = write_config(tmp_path, "scenario.kind = bouncing_ball\nnot a config\n")
        assert main(["simulate", path, "--out", str(tmp_path)]) == 3
        assert "line 2" in capsys.readouterr().err

    def test_exit_three_on_missing_file(self, tmp_path):
        assert main(["simulate", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 3

    def test_exit_one_on_run_failure(self, tmp_path, capsys):
        # config parses fine; the run itself cannot be built
        cfg = write_config(tmp_path, BALL_CONFIG + "scenario.mass = -1\n")
        assert main(["simulate", cfg, "--out", str(tmp_path)]) == 1
        assert "error" in capsys.readouterr().err


class TestSweepCommand:
    def test_theta_restitution_grid_matches_region(self, tmp_path):
        cfg = write_config(tmp_path, BALL_CONFIG.replace("run.t_end = 0.5",
                                                         "run.t_end = 1.0"))
        out = tmp_path / "sweep"
        code = main(["sweep", cfg, "--grid", "theta=0.5:1.0:6;e=0,0.5,1", "--out", str(out)])
        assert code == 0
        header, rows = read_csv(out / "sweep.csv")
        assert header == ["theta", "e", "condition_satisfied", "dissipation_fraction",
                          "max_energy_gain"]
        assert len(rows) == 18
        for row in rows:
            theta, e = float(row[0]), float(row[1])
            inside = 0.5 <= theta <= 1.0 / (1.0 + e) + 1e-12
            assert (row[2] == "true") == inside
            if inside:
                assert float(row[3]) == pytest.approx(1.0)

    def test_single_point_grid_matches_simulate(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "one"
        assert main(["sweep", cfg, "--grid", "theta=0.5", "--out", str(out)]) == 0
        header, rows = read_csv(out / "sweep.csv")
        assert header == ["theta", "condition_satisfied", "dissipation_fraction",
                          "max_energy_gain"]
        assert len(rows) == 1
        assert rows[0][1] == "true"
        assert float(rows[0][2]) == pytest.approx(1.0)

    def test_newmark_gamma_sweep_with_tied_beta(self, tmp_path):
        text = BALL_CONFIG.replace(
            "scheme.variant = moreau_jean\nscheme.theta = 0.5\n",
            "scheme.variant = newmark\nscheme.beta_rule = half_gamma\n")
        text = text.replace("scenario.restitution = 1.0", "scenario.restitution = 0.6")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "gsweep"
        assert main(["sweep", cfg, "--grid", "gamma=0.5,0.7,0.9,1.0", "--out", str(out)]) == 0
        _, rows = read_csv(out / "sweep.csv")
        for row in rows:
            assert row[1] == "true"              # condition holds for gamma >= 1/2
            assert float(row[2]) == pytest.approx(1.0)

    def test_unknown_axis_exits_three(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["sweep", cfg, "--grid", "mass=1,2", "--out", str(tmp_path)]) == 3

    def test_axis_incompatible_with_variant_exits_three(self, tmp_path, capsys):
        text = BALL_CONFIG.replace(
            "scheme.variant = moreau_jean\nscheme.theta = 0.5\n",
            "scheme.variant = hht\nscheme.alpha = 0.1\n")
        cfg = write_config(tmp_path, text)
        assert main(["sweep", cfg, "--grid", "theta=0.5,0.6", "--out", str(tmp_path)]) == 3
        assert "theta" in capsys.readouterr().err


class TestConvergenceCommand:
    OSC = """\
scenario.kind = forced_oscillator_contact
scenario.wall = -100
scheme.variant = moreau_jean
scheme.theta = 0.5
run.h = 1e-2
run.t_end = 1.0
"""

    def test_trapezoidal_order_two(self, tmp_path):
        cfg = write_config(tmp_path, self.OSC)
        out = tmp_path / "conv"
        code = main(["convergence", cfg, "--h", "1e-2,5e-3,2.5e-3,1.25e-3",
                     "--out", str(out)])
        assert code == 0
        _, rows = read_csv(out / "convergence.csv")
        assert len(rows) == 4
        assert float(rows[0][2]) >= 1.9

    def test_averaging_scheme_order_two(self, tmp_path):
        text = self.OSC.replace(
            "scheme.variant = moreau_jean\nscheme.theta = 0.5\n",
            "scheme.variant = generalized_alpha\nscheme.rho_infinity = 0.8\n")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "conva"
        assert main(["convergence", cfg, "--h", "1e-2,5e-3,2.5e-3,1.25e-3",
                     "--out", str(out)]) == 0
        _, rows = read_csv(out / "convergence.csv")
        assert float(rows[0][2]) >= 1.9

    def test_backward_weighting_order_one(self, tmp_path):
        cfg = write_config(tmp_path, self.OSC.replace("theta = 0.5", "theta = 1.0"))
        out = tmp_path / "conv1"
        assert main(["convergence", cfg, "--h", "1e-2,5e-3,2.5e-3,1.25e-3",
                     "--out", str(out)]) == 0
        _, rows = read_csv(out / "convergence.csv")
        assert abs(float(rows[0][2]) - 1.0) <= 0.15

    def test_activated_contact_invalidates_reference(self, tmp_path, capsys):
        # wall close enough to be hit: the study must refuse, not mislead
        text = self.OSC.replace("scenario.wall = -100", "scenario.wall = -0.9")
        cfg = write_config(tmp_path, text)
        assert main(["convergence", cfg, "--h", "1e-2,5e-3,2.5e-3",
                     "--out", str(tmp_path)]) == 1
        assert "contact activated" in capsys.readouterr().err

    def test_no_reference_exits_one(self, tmp_path, capsys):
        text = self.OSC.replace("forced_oscillator_contact", "elastic_bar_chain")
        text = text.replace("scenario.wall = -100\n", "")
        cfg = write_config(tmp_path, text)
        assert main(["convergence", cfg, "--h", "1e-2,5e-3,2.5e-3",
                     "--out", str(tmp_path)]) == 1
        assert "reference" in capsys.readouterr().err

    def test_too_few_step_sizes_exits_three(self, tmp_path):
        cfg = write_config(tmp_path, self.OSC)
        assert main(["convergence", cfg, "--h", "1e-2,5e-3", "--out", str(tmp_path)]) == 3
