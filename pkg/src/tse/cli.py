"""Command-line pipeline: dataset generation, training, evaluation, sweeps.

Exit codes: 0 success, 2 configuration error, 3 runtime/numeric error,
4 partial sweep failure. All randomness flows from one root seed per run,
split deterministically into init / observation / collocation streams.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from . import metrics, network, simulation, training
from .config import ExperimentConfig, apply_overrides, config_hash, load_config, serialize_config
from .errors import ConfigError, ContractError, DomainError, NumericError
from .metrics import RunReport
from .network import Scaling


def atomic_write(path: str, text: str):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def _atomic_via(path: str, writer):
    """Run a file-writing callable against a temp path, then rename."""
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def _sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir: str, config: ExperimentConfig, seeds: list[int],
                   artifacts: list[str], timing_artifacts: list[str],
                   failures: list[str] = ()):
    """Manifest with config hash, seeds and artifact checksums.

    Files carrying wall-clock measurements are listed but not checksummed so
    that reruns with fixed seeds produce byte-identical manifests.
    """
    lines = ["manifest-version = 1",
             f"config-sha256 = {config_hash(config)}",
             "seeds = " + ",".join(str(s) for s in seeds)]
    for rel in sorted(artifacts):
        lines.append(f"artifact {rel} sha256 {_sha256_file(os.path.join(out_dir, rel))}")
    for rel in sorted(timing_artifacts):
        lines.append(f"timing-artifact {rel}")
    for msg in failures:
        lines.append(f"failure {msg}")
    atomic_write(os.path.join(out_dir, "manifest.txt"), "\n".join(lines) + "\n")


def _scaling(config: ExperimentConfig) -> Scaling:
    g = config.grid()
    return Scaling(g.x_min, g.x_max, g.t_min, g.t_max, config.fd_v_free)


def _generate_fields(config: ExperimentConfig):
    grid = config.grid()
    p = config.fd_params()
    return simulation.simulate(config.initial_condition(), grid, p)


def _write_dataset(config: ExperimentConfig, out_dir: str, density, velocity) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    arts = []
    _atomic_via(os.path.join(out_dir, "truth_velocity.csv"),
                lambda path: simulation.field_to_csv(velocity, path, "v"))
    arts.append("truth_velocity.csv")
    _atomic_via(os.path.join(out_dir, "truth_density.csv"),
                lambda path: simulation.field_to_csv(density, path, "rho"))
    arts.append("truth_density.csv")
    _atomic_via(os.path.join(out_dir, "truth_velocity.pgm"),
                lambda path: simulation.velocity_to_pgm(velocity, path, config.fd_v_free))
    arts.append("truth_velocity.pgm")
    atomic_write(os.path.join(out_dir, "config.txt"), serialize_config(config))
    arts.append("config.txt")
    return arts


def run_experiment(config: ExperimentConfig, mode: str, sample_size: int, seed: int,
                   truth: simulation.VelocityField, out_dir: str | None = None):
    """One full train+evaluate cell; returns (RunReport, TrainResult, artifacts)."""
    if mode not in ("pidl", "dl"):
        raise ConfigError(f"mode must be pidl or dl, got {mode!r}")
    grid = config.grid()
    p = config.fd_params()
    scaling = _scaling(config)
    streams = training.seed_streams(seed)
    obs = training.sample_observations(truth, config.sensor_layout(), sample_size,
                                       streams["observations"],
                                       noise_std=config.train_noise_std)
    if mode == "dl":
        tc = config.train_config(alpha=0.0, n_collocation=0, seed=seed)
        coll = training.CollocationSet(np.empty(0), np.empty(0))
    else:
        tc = config.train_config(seed=seed)
        coll = training.sample_collocation(grid, tc.n_collocation, streams["collocation"])
    net0 = network.initialize(tc.layer_sizes, streams["init"],
                              tc.activation, tc.frequency_scale)
    result = training.train(tc, obs, coll, p, scaling, net=net0)
    estimate = metrics.evaluate_network(result.net, grid, p)
    err = metrics.relative_error(estimate, truth)
    label = "PIDL" if mode == "pidl" else "DL"
    report = RunReport.build(label, sample_size, grid, result, err, seed=seed)

    artifacts, timing = [], []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        _atomic_via(os.path.join(out_dir, "checkpoint_epoch0.txt"),
                    lambda path: network.save_checkpoint(net0, path))
        _atomic_via(os.path.join(out_dir, "checkpoint.txt"),
                    lambda path: network.save_checkpoint(result.net, path))
        _atomic_via(os.path.join(out_dir, "history.csv"),
                    lambda path: training.history_to_csv(result, path))
        _atomic_via(os.path.join(out_dir, "estimate.pgm"),
                    lambda path: simulation.velocity_to_pgm(estimate, path, p.v_free))
        atomic_write(os.path.join(out_dir, "summary.txt"),
                     metrics.summary_keyvalues(report, include_timing=False))
        atomic_write(os.path.join(out_dir, "timing.txt"),
                     f"wall_time_seconds = {result.wall_time:.6f}\n")
        artifacts = ["checkpoint_epoch0.txt", "checkpoint.txt", "estimate.pgm", "summary.txt"]
        timing = ["history.csv", "timing.txt"]
    return report, result, artifacts, timing


# -- subcommands -------------------------------------------------------------

def cmd_generate(config: ExperimentConfig, out_dir: str) -> int:
    density, velocity = _generate_fields(config)
    arts = _write_dataset(config, out_dir, density, velocity)
    write_manifest(out_dir, config, [config.run_seed], arts, [])
    print(f"dataset written to {out_dir} ({config.grid_n_x}x{config.grid_n_t} cells)")
    return 0


def cmd_train(config: ExperimentConfig, mode: str, out_dir: str) -> int:
    _, velocity = _generate_fields(config)
    report, result, arts, timing = run_experiment(
        config, mode, config.train_n_samples, config.run_seed, velocity, out_dir=out_dir)
    atomic_write(os.path.join(out_dir, "table.txt"), metrics.emit_comparison_table([report]))
    timing.append("table.txt")
    atomic_write(os.path.join(out_dir, "config.txt"), serialize_config(config))
    arts.append("config.txt")
    write_manifest(out_dir, config, [config.run_seed], arts, timing)
    print(metrics.emit_comparison_table([report]), end="")
    return 0


def cmd_sweep(config: ExperimentConfig, sample_sizes: list[int], seeds: list[int],
              out_dir: str) -> int:
    if not sample_sizes or not seeds:
        raise ConfigError("sweep needs at least one sample size and one seed")
    _, velocity = _generate_fields(config)
    os.makedirs(out_dir, exist_ok=True)
    reports: list[RunReport] = []
    artifacts, timing, failures = [], [], []
    for size in sample_sizes:
        for seed in seeds:
            for mode in ("pidl", "dl"):
                cell = f"run_{mode}_s{size}_seed{seed}"
                try:
                    report, _, arts, tim = run_experiment(
                        config, mode, size, seed, velocity,
                        out_dir=os.path.join(out_dir, cell))
                    reports.append(report)
                    artifacts += [f"{cell}/{a}" for a in arts]
                    timing += [f"{cell}/{t}" for t in tim]
                except (NumericError, DomainError, ContractError, OSError) as e:
                    failures.append(f"{cell}: {type(e).__name__}: {e}")
    if reports:
        atomic_write(os.path.join(out_dir, "table.txt"),
                     metrics.emit_comparison_table(reports))
        atomic_write(os.path.join(out_dir, "table.csv"), metrics.comparison_csv(reports))
        atomic_write(os.path.join(out_dir, "table_det.csv"),
                     metrics.comparison_csv(reports, include_timing=False))
        atomic_write(os.path.join(out_dir, "means.txt"), _mean_table(reports))
        artifacts += ["table_det.csv", "means.txt"]
        timing += ["table.txt", "table.csv"]
    atomic_write(os.path.join(out_dir, "config.txt"), serialize_config(config))
    artifacts.append("config.txt")
    write_manifest(out_dir, config, seeds, artifacts, timing, failures)
    if reports:
        print(_mean_table(reports), end="")
    if failures:
        print(f"{len(failures)} sweep cell(s) failed; see manifest", file=sys.stderr)
        return 4
    return 0


def _mean_table(reports: list[RunReport]) -> str:
    """Mean accuracy per (sample size, label), laid out like the varying-size
    comparison table."""
    sizes = sorted({r.sample_size for r in reports})
    lines = ["Sample Size  % Data   PIDL Accuracy  DL Accuracy",
             "-----------  -------  -------------  -----------"]
    for size in sizes:
        rows = [r for r in reports if r.sample_size == size]
        pct = rows[0].percent_data
        def mean_acc(label):
            vals = [r.accuracy for r in rows if r.label == label]
            return f"{np.mean(vals):.2f}%" if vals else "-"
        lines.append(f"{size:<11}  {pct:6.3f}%  {mean_acc('PIDL'):<13}  {mean_acc('DL')}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(config: ExperimentConfig, checkpoint_path: str, out_dir: str) -> int:
    net = network.load_checkpoint(checkpoint_path)
    grid = config.grid()
    p = config.fd_params()
    _, truth = _generate_fields(config)
    estimate = metrics.evaluate_network(net, grid, p)
    err = metrics.relative_error(estimate, truth)
    os.makedirs(out_dir, exist_ok=True)
    lines = [f"relative_error_percent = {err:.17g}",
             f"accuracy_percent = {100.0 - err:.17g}",
             f"mse = {metrics.mse_field(estimate, truth):.17g}"]
    atomic_write(os.path.join(out_dir, "evaluation.txt"), "\n".join(lines) + "\n")
    _atomic_via(os.path.join(out_dir, "estimate.pgm"),
                lambda path: simulation.velocity_to_pgm(estimate, path, p.v_free))
    print("\n".join(lines))
    return 0


# -- argument parsing --------------------------------------------------------

def _int_list(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tse",
        description="Traffic state estimation with physics-informed deep learning")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="config file (flat key=value)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--out", help="override run.out_dir")

    common(sub.add_parser("generate", help="write the synthetic ground-truth dataset"))

    sp = sub.add_parser("train", help="train one network and evaluate it")
    common(sp)
    sp.add_argument("--mode", choices=["pidl", "dl"], default="pidl")

    sp = sub.add_parser("sweep", help="train PIDL and DL across sizes and seeds")
    common(sp)
    sp.add_argument("--sample-sizes", type=_int_list, default=[250])
    sp.add_argument("--seeds", type=_int_list, default=[0, 1, 2])

    sp = sub.add_parser("evaluate", help="evaluate a checkpoint against the ground truth")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    return parser


def _load(args) -> tuple[ExperimentConfig, str]:
    config = load_config(args.config) if args.config else ExperimentConfig()
    apply_overrides(config, args.set)
    if args.seed is not None:
        config.run_seed = args.seed
    if args.out is not None:
        config.run_out_dir = args.out
    config.grid()         # validate early
    config.fd_params()
    config.train_config().validate()
    return config, config.run_out_dir


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, out_dir = _load(args)
    except (ConfigError, DomainError, OSError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    try:
        os.makedirs(out_dir, exist_ok=True)
        if args.command == "generate":
            return cmd_generate(config, out_dir)
        if args.command == "train":
            return cmd_train(config, args.mode, out_dir)
        if args.command == "sweep":
            if not args.seeds:
                print("configuration error: empty seed list", file=sys.stderr)
                return 2
            return cmd_sweep(config, args.sample_sizes, args.seeds, out_dir)
        if args.command == "evaluate":
            return cmd_evaluate(config, args.checkpoint, out_dir)
        return 2
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    except (NumericError, DomainError, ContractError, OSError) as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
