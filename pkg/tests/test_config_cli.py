"""Tests for the flat key-value configuration format and the command-line
pipeline (generate / train / sweep / evaluate, exit codes, manifests)."""

import os

import numpy as np
import pytest

from tse.cli import main
from tse.config import (
    ExperimentConfig,
    apply_overrides,
    config_hash,
    load_config,
    parse_config,
    serialize_config,
)
from tse.errors import ConfigError
from tse.simulation import Grid


class TestConfig:
    def test_defaults_match_case_study(self):
        c = ExperimentConfig()
        assert c.grid() == Grid(0.0, 5000.0, 500, 0.0, 240.0, 240)
        assert c.fd_v_free == 25.0 and c.fd_rho_max == 0.05
        assert len(c.sensors_positions) == 5
        assert c.train_n_samples == 250

    def test_serialize_parse_round_trip(self):
        c = ExperimentConfig()
        c.grid_n_x = 123
        c.train_alpha = 0.5
        c.sensors_positions = (100.0, 200.0)
        back = parse_config(serialize_config(c))
        assert back == c

    def test_overrides(self):
        c = apply_overrides(ExperimentConfig(), ["grid.n_x=50", "train.alpha=2.5",
                                                 "sensors.positions=100,200,300",
                                                 "train.activation=tanh",
                                                 "ic.wave_start=0"])
        assert c.grid_n_x == 50
        assert c.train_alpha == 2.5
        assert c.sensors_positions == (100.0, 200.0, 300.0)
        assert c.train_config().activation == "tanh"
        assert c.initial_condition().wave_start == 0.0

    def test_unknown_key_named_in_error(self):
        with pytest.raises(ConfigError, match="grid.n_z"):
            apply_overrides(ExperimentConfig(), ["grid.n_z=7"])

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError, match="grid.n_x"):
            apply_overrides(ExperimentConfig(), ["grid.n_x=many"])

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError):
            apply_overrides(ExperimentConfig(), ["grid.n_x"])

    def test_comments_and_blank_lines(self):
        text = "# a comment\n\ngrid.n_x = 50  # trailing comment\n"
        assert parse_config(text).grid_n_x == 50

    def test_hash_stable_and_value_sensitive(self):
        a, b = ExperimentConfig(), ExperimentConfig()
        assert config_hash(a) == config_hash(b)
        b.run_seed = 1
        assert config_hash(a) != config_hash(b)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("grid.n_x = 40\nrun.seed = 3\n")
        c = load_config(path)
        assert c.grid_n_x == 40 and c.run_seed == 3

    def test_train_config_factory(self):
        c = ExperimentConfig()
        tc = c.train_config()
        assert tc.layer_sizes == [2] + [c.train_hidden_width] * c.train_hidden_layers + [1]
        assert tc.seed == c.run_seed
        dl = c.train_config(alpha=0.0, n_collocation=0)
        assert dl.alpha == 0.0 and dl.n_collocation == 0
        assert dl.max_epochs == tc.max_epochs  # shared stopping rule


TINY = [
    "--set", "grid.n_x=50", "--set", "grid.n_t=24", "--set", "grid.t_max=24",
    "--set", "train.n_samples=40", "--set", "train.max_epochs=50",
    "--set", "train.n_collocation=64", "--set", "train.hidden_layers=2",
    "--set", "train.hidden_width=8",
]


def tiny_args(cmd, out, extra=()):
    return [cmd, *TINY, "--out", str(out), *extra]


class TestCliGenerate:
    def test_writes_dataset_and_manifest(self, tmp_path):
        out = tmp_path / "gen"
        assert main(tiny_args("generate", out)) == 0
        for name in ("truth_velocity.csv", "truth_density.csv",
                     "truth_velocity.pgm", "config.txt", "manifest.txt"):
            assert (out / name).exists()
        lines = (out / "truth_velocity.csv").read_text().splitlines()
        assert len(lines) == 1 + 50 * 24

    def test_byte_identical_reruns(self, tmp_path):
        out = tmp_path / "a"
        assert main(tiny_args("generate", out)) == 0
        first = {name: (out / name).read_bytes()
                 for name in ("truth_velocity.csv", "manifest.txt")}
        assert main(tiny_args("generate", out)) == 0
        for name, data in first.items():
            assert (out / name).read_bytes() == data

    def test_default_grid_row_count(self, tmp_path):
        out = tmp_path / "full"
        assert main(["generate", "--set", "train.max_epochs=1", "--out", str(out)]) == 0
        lines = (out / "truth_velocity.csv").read_text().splitlines()
        assert len(lines) == 1 + 500 * 240


class TestCliTrain:
    def test_pidl_and_dl_share_initialization(self, tmp_path):
        pidl, dl = tmp_path / "pidl", tmp_path / "dl"
        assert main(tiny_args("train", pidl, ["--mode", "pidl", "--seed", "5"])) == 0
        assert main(tiny_args("train", dl, ["--mode", "dl", "--seed", "5"])) == 0
        assert (pidl / "checkpoint_epoch0.txt").read_bytes() == \
               (dl / "checkpoint_epoch0.txt").read_bytes()
        # identical initialization and data term -> identical epoch-0 J_DL
        first_pidl = (pidl / "history.csv").read_text().splitlines()[1].split(",")
        first_dl = (dl / "history.csv").read_text().splitlines()[1].split(",")
        assert first_pidl[1] == first_dl[1]
        # the DL baseline carries no physics term
        assert all(row.split(",")[2] == "0" for row in
                   (dl / "history.csv").read_text().splitlines()[1:])

    def test_artifacts_written(self, tmp_path):
        out = tmp_path / "run"
        assert main(tiny_args("train", out)) == 0
        for name in ("checkpoint.txt", "checkpoint_epoch0.txt", "history.csv",
                     "estimate.pgm", "summary.txt", "timing.txt", "table.txt",
                     "config.txt", "manifest.txt"):
            assert (out / name).exists()
        summary = dict(line.split(" = ") for line in
                       (out / "summary.txt").read_text().strip().splitlines())
        acc = float(summary["accuracy_percent"])
        err = float(summary["relative_error_percent"])
        assert acc + err == 100.0

    def test_threshold_termination_reflected_in_history(self, tmp_path):
        out = tmp_path / "thresh"
        extra = ["--set", "train.cost_threshold=1000", "--set", "train.max_epochs=500"]
        assert main(tiny_args("train", out, extra)) == 0
        summary = dict(line.split(" = ") for line in
                       (out / "summary.txt").read_text().strip().splitlines())
        assert summary["terminated_by"] == "threshold"
        last = (out / "history.csv").read_text().splitlines()[-1].split(",")
        assert float(last[3]) < 1000.0


class TestCliSweep:
    def test_two_row_comparison(self, tmp_path):
        out = tmp_path / "sweep"
        code = main(tiny_args("sweep", out,
                              ["--sample-sizes", "40", "--seeds", "0"]))
        assert code == 0
        table = (out / "table.txt").read_text()
        rows = [r for r in table.splitlines()[2:] if r]
        assert len(rows) == 2
        assert {r.split()[0] for r in rows} == {"PIDL", "DL"}
        assert (out / "means.txt").exists()
        assert (out / "table_det.csv").exists()

    def test_manifest_byte_identical_across_reruns(self, tmp_path):
        out = tmp_path / "a"
        args = ["--sample-sizes", "30,40", "--seeds", "0,1"]
        assert main(tiny_args("sweep", out, args)) == 0
        first = (out / "manifest.txt").read_bytes()
        assert main(tiny_args("sweep", out, args)) == 0
        assert (out / "manifest.txt").read_bytes() == first

    def test_architecture_parity_per_seed(self, tmp_path):
        out = tmp_path / "parity"
        assert main(tiny_args("sweep", out, ["--sample-sizes", "40", "--seeds", "7"])) == 0
        pidl = out / "run_pidl_s40_seed7" / "checkpoint_epoch0.txt"
        dl = out / "run_dl_s40_seed7" / "checkpoint_epoch0.txt"
        assert pidl.read_bytes() == dl.read_bytes()

    def test_empty_seed_list_is_config_error(self, tmp_path):
        code = main(tiny_args("sweep", tmp_path / "x", ["--seeds", ""]))
        assert code == 2

    def test_percent_data_column(self, tmp_path):
        out = tmp_path / "pct"
        assert main(["sweep", "--set", "train.max_epochs=2",
                     "--set", "train.n_collocation=16",
                     "--set", "train.hidden_layers=1", "--set", "train.hidden_width=4",
                     "--sample-sizes", "500,750,1000", "--seeds", "0",
                     "--out", str(out)]) == 0
        csv_lines = (out / "table_det.csv").read_text().splitlines()
        pct = {int(r.split(",")[2]): float(r.split(",")[3]) for r in csv_lines[1:]}
        assert pct[500] == pytest.approx(0.417, abs=5e-4)
        assert pct[750] == pytest.approx(0.625, abs=5e-4)
        assert pct[1000] == pytest.approx(0.833, abs=5e-4)


class TestCliEvaluate:
    def test_checkpoint_round_trip_evaluation(self, tmp_path):
        run = tmp_path / "run"
        assert main(tiny_args("train", run)) == 0
        out = tmp_path / "eval"
        code = main(tiny_args("evaluate", out,
                              ["--checkpoint", str(run / "checkpoint.txt")]))
        assert code == 0
        text = dict(line.split(" = ") for line in
                    (out / "evaluation.txt").read_text().strip().splitlines())
        summary = dict(line.split(" = ") for line in
                       (run / "summary.txt").read_text().strip().splitlines())
        assert float(text["relative_error_percent"]) == \
            pytest.approx(float(summary["relative_error_percent"]), rel=1e-12)


class TestExitCodes:
    def test_unknown_key(self, tmp_path, capsys):
        assert main(["generate", "--set", "nope.nope=1", "--out", str(tmp_path / "x")]) == 2
        assert "nope.nope" in capsys.readouterr().err

    def test_invalid_grid(self, tmp_path):
        assert main(["generate", "--set", "grid.n_x=1", "--out", str(tmp_path / "x")]) == 2

    def test_oversampling_is_config_error(self, tmp_path):
        args = tiny_args("train", tmp_path / "x", ["--set", "train.n_samples=9999"])
        assert main(args) == 2
