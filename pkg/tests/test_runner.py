"""Config grammar, run directories, metric streams and floor fitting."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from spinvmc import (
    fit_sampling_floor,
    load_checkpoint,
    min_grad_curve,
    parse_config_text,
    relative_energy_error,
    resolve_config,
    run_experiment,
    run_report,
    sliding_window,
    sweep_experiment,
)
from spinvmc.__main__ import main as cli_main
from spinvmc.runner import RECORD_COLUMNS, read_records

TINY_RUN = """
# four-site chain smoke config
model.kind = tfi
model.length = 4
model.h = 1.0
ansatz.density = 2
ansatz.seed = 3
sampler.mode = direct
sampler.n_samples = 32
sampler.seed = 7
optimizer.kind = spring
optimizer.lambda = 1e-3
optimizer.mu = 0.9
optimizer.eta0 = 0.02
optimizer.c = 1e-4
optimizer.norm_constraint = 1e-3
optimizer.clip_std = 5
optimizer.iterations = 25
run.record_every = 1
run.full_grad_norm = true
"""


def tiny_config(**overrides):
    raw = parse_config_text(TINY_RUN)
    raw.update(overrides)
    return raw


class TestConfigGrammar:
    def test_parse_types(self):
        raw = parse_config_text(
            "a.x = 3\nb.y = 2.5\nc.z = true\nd.w = text\ne.v = none\n"
        )
        assert raw == {"a.x": 3, "b.y": 2.5, "c.z": True, "d.w": "text", "e.v": None}

    def test_comments_and_blank_lines(self):
        raw = parse_config_text("# full-line comment\n\nmodel.kind = tfi  # trailing\n")
        assert raw == {"model.kind": "tfi"}

    def test_braced_sweep_axis(self):
        raw = parse_config_text("optimizer.mu = {0, 0.5, 0.99}\n")
        assert raw["optimizer.mu"] == [0, 0.5, 0.99]

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError, match="key = value"):
            parse_config_text("just some words\n")

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            resolve_config({"model.kinds": "tfi"})

    def test_width_implies_square(self):
        cfg = resolve_config({"model.kind": "tfi", "model.width": 3})
        assert cfg.model.geometry == "square"
        assert cfg.model.n_sites == 9

    def test_sweep_axis_rejected_by_plain_run(self):
        with pytest.raises(ValueError, match="sweep"):
            resolve_config({"optimizer.mu": [0.1, 0.2]})

    def test_clip_none_disables(self):
        cfg = resolve_config(tiny_config(**{"optimizer.clip_std": None}))
        assert cfg.clip_std is None


class TestRunExperiment:
    def test_run_directory_contents(self, tmp_path):
        out = run_experiment(tiny_config(), tmp_path / "run")
        assert (out / "records.csv").exists()
        assert (out / "config.resolved.json").exists()
        ansatz, theta = load_checkpoint(out / "checkpoint.rbm")
        assert ansatz.n_visible == 4 and ansatz.n_hidden == 8
        assert np.all(np.isfinite(theta))
        records = read_records(out)
        assert len(records["k"]) == 25
        assert list(records) == RECORD_COLUMNS

    def test_replay_reproduces_records(self, tmp_path):
        out1 = run_experiment(tiny_config(), tmp_path / "a")
        out2 = run_experiment(tiny_config(), tmp_path / "b")
        r1, r2 = read_records(out1), read_records(out2)
        for col in RECORD_COLUMNS:
            if col == "wall_ms":  # wall clock is measurement, not physics
                continue
            np.testing.assert_array_equal(r1[col], r2[col], err_msg=col)

    def test_record_every_decimates(self, tmp_path):
        out = run_experiment(
            tiny_config(**{"run.record_every": 5}), tmp_path / "run"
        )
        records = read_records(out)
        assert len(records["k"]) == 5
        assert records["k"][-1] == 24

    def test_energy_descends_toward_ground_state(self, tmp_path):
        raw = tiny_config(**{"optimizer.iterations": 150, "sampler.n_samples": 128})
        out = run_experiment(raw, tmp_path / "run")
        records = read_records(out)
        smoothed = sliding_window(records["energy"], 25)
        assert smoothed[-1] < smoothed[10]
        report = run_report(out, window=25)
        assert report["final_smoothed_relative_error"] < 0.05

    @pytest.mark.parametrize("kind", ["sgd", "sr", "minsr", "spring", "fspring", "prime"])
    def test_schema_stable_across_optimizers(self, kind, tmp_path):
        raw = tiny_config(**{"optimizer.kind": kind, "optimizer.iterations": 4})
        out = run_experiment(raw, tmp_path / kind)
        with open(out / "records.csv") as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "# schema=records-v1"
        assert lines[1] == ",".join(RECORD_COLUMNS)
        assert len(lines) == 2 + 4
        records = read_records(out)
        if kind == "prime":
            assert np.all((records["mu_k"] >= 0) & (records["mu_k"] <= 1))
            assert np.all(records["rank_k"] >= 1)
        if kind in ("sgd", "sr", "minsr"):
            assert np.all(np.isnan(records["mu_k"]))

    def test_metropolis_mode_runs(self, tmp_path):
        raw = tiny_config(**{
            "sampler.mode": "metropolis",
            "sampler.burn_in": 100,
            "sampler.steps_between": 5,
            "optimizer.iterations": 10,
        })
        out = run_experiment(raw, tmp_path / "run")
        assert len(read_records(out)["k"]) == 10

    def test_output_root_env_override(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SPINVMC_OUTPUT_ROOT", str(tmp_path / "root"))
        raw = tiny_config(**{"run.output": "nested/run", "optimizer.iterations": 2})
        out = run_experiment(raw)
        assert out == tmp_path / "root" / "nested" / "run"
        assert (out / "records.csv").exists()

    def test_full_grad_norm_guard(self):
        raw = tiny_config(**{"model.length": 13})
        with pytest.raises(ValueError, match="full_grad_norm"):
            resolve_config(raw)


class TestSweep:
    def test_grid_expansion(self, tmp_path):
        raw = tiny_config(**{"optimizer.mu": [0.0, 0.5], "optimizer.iterations": 3})
        dirs = sweep_experiment(raw, tmp_path / "sweep")
        assert sorted(d.name for d in dirs) == ["mu=0.0", "mu=0.5"]
        for d in dirs:
            resolved = json.loads((d / "config.resolved.json").read_text())
            assert resolved["optimizer"]["mu"] == float(d.name.split("=")[1])

    def test_sweep_without_axes_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="axes"):
            sweep_experiment(tiny_config(), tmp_path)


class TestSlidingWindow:
    def test_constant_series_unchanged(self):
        s = np.full(10, 2.5)
        np.testing.assert_array_equal(sliding_window(s, 4), s)

    def test_window_one_is_identity(self, rng):
        s = rng.standard_normal(20)
        np.testing.assert_array_equal(sliding_window(s, 1), s)

    def test_hand_case(self):
        np.testing.assert_allclose(sliding_window(np.array([0.0, 2.0]), 2), [0.0, 1.0])

    def test_truncated_start(self):
        out = sliding_window(np.array([4.0, 0.0, 2.0, 6.0]), 3)
        np.testing.assert_allclose(out, [4.0, 2.0, 2.0, 8.0 / 3.0])

    def test_invalid_window(self):
        with pytest.raises(ValueError):
            sliding_window(np.ones(3), 0)


class TestMinGradCurve:
    def test_monotone_input_is_identity(self, tmp_path):
        out = run_experiment(tiny_config(**{"optimizer.iterations": 40}), tmp_path / "r")
        curve = min_grad_curve(out)
        assert np.all(np.diff(curve) <= 0)
        series = read_records(out)["full_grad_norm"]
        np.testing.assert_array_equal(curve, np.minimum.accumulate(series))

    def test_missing_column_rejected(self, tmp_path):
        raw = tiny_config(**{"run.full_grad_norm": False, "optimizer.iterations": 3})
        out = run_experiment(raw, tmp_path / "r")
        with pytest.raises(ValueError, match="full_grad_norm"):
            min_grad_curve(out)


class TestFitSamplingFloor:
    def test_recovers_exact_synthetic_coefficients(self):
        b, c = 4.0, 100.0
        ns = [64, 128, 256, 1024, 4096]
        points = [(n, math.sqrt(b / n + c / n**2)) for n in ns]
        bf, cf, resid = fit_sampling_floor(points)
        assert bf == pytest.approx(4.0, abs=1e-8)
        assert cf == pytest.approx(100.0, abs=1e-6)
        assert resid <= 1e-10

    def test_pure_first_order_data_clamps_c(self):
        points = [(n, math.sqrt(2.0 / n)) for n in (50, 200, 800, 3200)]
        b, c, resid = fit_sampling_floor(points)
        assert abs(c) <= 1e-9
        assert b == pytest.approx(2.0, rel=1e-8)

    def test_constant_floor_flagged_by_residual(self):
        points = [(n, 0.5) for n in (64, 256, 1024, 4096)]
        _, _, resid = fit_sampling_floor(points)
        assert resid > 0.5

    def test_input_validation(self):
        with pytest.raises(ValueError, match="distinct"):
            fit_sampling_floor([(10, 1.0), (10, 0.9)])
        with pytest.raises(ValueError, match="positive"):
            fit_sampling_floor([(10, 1.0), (20, 0.0), (40, 0.5)])


class TestRelativeEnergyError:
    def test_exact_energy_gives_zeros(self, tmp_path):
        out = run_experiment(tiny_config(**{"optimizer.iterations": 5}), tmp_path / "r")
        records = read_records(out)
        err = relative_energy_error(out, records["energy"][0], window=1)
        assert err[0] == 0.0

    def test_three_row_fixture(self, tmp_path):
        run = tmp_path / "fixture"
        run.mkdir()
        with open(run / "records.csv", "w") as fh:
            fh.write("# schema=records-v1\n")
            fh.write(",".join(RECORD_COLUMNS) + "\n")
            for k, e in enumerate([-1.0, -1.5, -2.5]):
                row = {c: "" for c in RECORD_COLUMNS}
                row.update({"k": str(k), "energy": repr(e)})
                fh.write(",".join(row[c] for c in RECORD_COLUMNS) + "\n")
        # |E - (-2)| / 2 = (0.5, 0.25, 0.25), trailing window 2 -> (0.5, 0.375, 0.25)
        err = relative_energy_error(run, -2.0, window=2)
        np.testing.assert_allclose(err, [0.5, 0.375, 0.25])
        # sign of the exact energy is irrelevant
        err_pos = relative_energy_error(run, 2.0, window=1)
        np.testing.assert_allclose(err_pos, [1.5, 1.75, 2.25])


@pytest.mark.slow
class TestProductionScaleRun:
    def test_tfi_chain_10_momentum_run_descends(self, tmp_path):
        raw = {
            "model.kind": "tfi", "model.length": 10, "model.h": 1.0,
            "ansatz.density": 5, "ansatz.seed": 0,
            "sampler.mode": "direct", "sampler.n_samples": 1000, "sampler.seed": 0,
            "optimizer.kind": "spring", "optimizer.mu": 0.99,
            "optimizer.iterations": 1000, "run.record_every": 1,
        }
        out = run_experiment(raw, tmp_path / "run")
        records = read_records(out)
        assert len(records["k"]) == 1000
        e_exact = -12.784906442999324  # frozen dense-diagonalization reference
        smoothed = sliding_window(records["energy"], 100)
        checkpoints = smoothed[99::100]  # one per smoothing window
        # strictly decreasing until converged; after convergence the smoothed
        # series only wiggles at the sampling-noise scale (~1e-5 relative)
        deltas = np.diff(checkpoints)
        assert np.all(deltas < 1e-5 * abs(e_exact))
        assert checkpoints[-1] < checkpoints[0] - 1.5
        assert abs(smoothed[-1] - e_exact) / abs(e_exact) < 1e-3


class TestCLI:
    def test_run_and_report(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(TINY_RUN.replace("optimizer.iterations = 25",
                                        "optimizer.iterations = 6"))
        assert cli_main(["run", str(cfg), "-o", str(tmp_path / "out")]) == 0
        assert capsys.readouterr().out.strip() == str(tmp_path / "out")
        assert cli_main(["report", str(tmp_path / "out"), "--window", "3"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["iterations"] == 6

    def test_report_payload(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text(TINY_RUN)
        cli_main(["run", str(cfg), "-o", str(tmp_path / "out")])
        capsys.readouterr()
        cli_main(["report", str(tmp_path / "out")])
        payload = json.loads(capsys.readouterr().out)
        assert payload["rows"] == 25
        assert "exact_energy" in payload

    def test_sweep_and_floor_fit(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.txt"
        cfg.write_text(
            TINY_RUN.replace("sampler.n_samples = 32",
                             "sampler.n_samples = {16, 32, 64}")
            .replace("optimizer.iterations = 25", "optimizer.iterations = 8")
        )
        assert cli_main(["sweep", str(cfg), "-o", str(tmp_path / "grid")]) == 0
        dirs = sorted(str(p) for p in (tmp_path / "grid").iterdir())
        assert len(dirs) == 3
        out_file = tmp_path / "fit.json"
        assert cli_main(["floor-fit", *dirs, "--out", str(out_file)]) == 0
        fit = json.loads(out_file.read_text())
        assert {"b", "c", "relative_residual", "floors"} <= set(fit)
