"""Evaluation metrics (field MSE, Frobenius relative error), dense network
evaluation over the grid, and table/report emission."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .network import MlpNetwork, NetworkGraph, Scaling
from .physics import FdParams
from .simulation import Grid, VelocityField


def _check_grids(estimate: VelocityField, truth: VelocityField):
    if estimate.grid != truth.grid or estimate.values.shape != truth.values.shape:
        raise ContractError("estimate and truth must share the same grid")


def mse_field(estimate: VelocityField, truth: VelocityField) -> float:
    """Mean squared error over all space-time cells."""
    _check_grids(estimate, truth)
    diff = estimate.values - truth.values
    return float(np.mean(diff * diff))


def relative_error(estimate: VelocityField, truth: VelocityField) -> float:
    """Frobenius-normalized error in percent: 100 * ||V - V_hat||_F / ||V||_F."""
    _check_grids(estimate, truth)
    denom = np.linalg.norm(truth.values)
    if denom == 0.0:
        raise DomainError("truth field is identically zero")
    return float(100.0 * np.linalg.norm(truth.values - estimate.values) / denom)


def evaluate_network(net: MlpNetwork, grid: Grid, p: FdParams) -> VelocityField:
    """Evaluate the estimator at every cell center, in physical m/s.

    Outputs are clamped to [0, v_free] (report range); training never clamps.
    """
    scaling = Scaling(grid.x_min, grid.x_max, grid.t_min, grid.t_max, p.v_free)
    xx, tt = np.meshgrid(grid.x_centers, grid.times, indexing="ij")
    x_norm = scaling.norm_points(xx.ravel(), tt.ravel())
    raw = NetworkGraph(net).output(x_norm).value.reshape(grid.n_x, grid.n_t)
    v = np.clip(p.v_free * raw, 0.0, p.v_free)
    return VelocityField(grid, v)


@dataclass
class RunReport:
    """Per-experiment metrics, one row of the comparison tables."""

    label: str                 # "PIDL" | "DL"
    sample_size: int
    percent_data: float        # 100 * sample_size / (n_x * n_t)
    final_j_dl: float
    final_j_phy: float
    final_j_total: float
    relative_error_e: float    # percent
    accuracy: float            # 100 - relative_error_e
    wall_time: float
    epochs_run: int
    terminated_by: str
    seed: int = 0

    @classmethod
    def build(cls, label, sample_size, grid: Grid, result, error_percent, seed=0):
        epoch, j_dl, j_phy, j_total = result.history[-1] if result.history else (0, 0.0, 0.0, 0.0)
        return cls(label=label, sample_size=sample_size,
                   percent_data=100.0 * sample_size / (grid.n_x * grid.n_t),
                   final_j_dl=j_dl, final_j_phy=j_phy, final_j_total=j_total,
                   relative_error_e=error_percent,
                   accuracy=100.0 - error_percent,
                   wall_time=result.wall_time, epochs_run=result.epochs_run,
                   terminated_by=result.terminated_by, seed=seed)


_COLUMNS = [
    ("Label", lambda r: r.label),
    ("Seed", lambda r: str(r.seed)),
    ("Sample Size", lambda r: str(r.sample_size)),
    ("% Data", lambda r: f"{r.percent_data:.3f}%"),
    ("Computation Time (s)", lambda r: f"{r.wall_time:.2f}"),
    ("Epochs", lambda r: str(r.epochs_run)),
    ("Accuracy", lambda r: f"{r.accuracy:.2f}%"),
]


def emit_comparison_table(reports: list[RunReport]) -> str:
    """Fixed-column plain-text table; the best accuracy per sample size is
    flagged with '*' when the group has more than one row."""
    if not reports:
        raise ContractError("need at least one report")
    flags = _best_flags(reports)
    header = [name for name, _ in _COLUMNS] + ["Best"]
    rows = [[fmt(r) for _, fmt in _COLUMNS] + ["*" if f else ""] for r, f in zip(reports, flags)]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(header)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(row) for row in rows]) + "\n"


def comparison_csv(reports: list[RunReport], include_timing: bool = True) -> str:
    """Machine-readable twin of the comparison table.

    With include_timing=False the wall-time column is omitted, which makes
    the output deterministic for fixed seeds (used for manifest checksums).
    """
    if not reports:
        raise ContractError("need at least one report")
    flags = _best_flags(reports)
    time_col = "wall_time_s," if include_timing else ""
    lines = [f"label,seed,sample_size,percent_data,{time_col}epochs,"
             "relative_error_pct,accuracy_pct,terminated_by,best"]
    for r, f in zip(reports, flags):
        time_val = f"{r.wall_time:.6f}," if include_timing else ""
        lines.append(f"{r.label},{r.seed},{r.sample_size},{r.percent_data:.17g},"
                     f"{time_val}{r.epochs_run},{r.relative_error_e:.17g},"
                     f"{r.accuracy:.17g},{r.terminated_by},{1 if f else 0}")
    return "\n".join(lines) + "\n"


def _best_flags(reports: list[RunReport]) -> list[bool]:
    flags = [False] * len(reports)
    groups: dict[int, list[int]] = {}
    for i, r in enumerate(reports):
        groups.setdefault(r.sample_size, []).append(i)
    for idxs in groups.values():
        if len(idxs) > 1:
            best = max(idxs, key=lambda i: reports[i].accuracy)
            flags[best] = True
    return flags


def summary_keyvalues(report: RunReport, include_timing: bool = True) -> str:
    """Single-run summary in `key = value` lines for scripting."""
    pairs = [
        ("label", report.label),
        ("seed", report.seed),
        ("sample_size", report.sample_size),
        ("percent_data", f"{report.percent_data:.17g}"),
        ("final_j_dl", f"{report.final_j_dl:.17g}"),
        ("final_j_phy", f"{report.final_j_phy:.17g}"),
        ("final_j_total", f"{report.final_j_total:.17g}"),
        ("relative_error_percent", f"{report.relative_error_e:.17g}"),
        ("accuracy_percent", f"{report.accuracy:.17g}"),
        ("epochs_run", report.epochs_run),
        ("terminated_by", report.terminated_by),
    ]
    if include_timing:
        pairs.append(("wall_time_seconds", f"{report.wall_time:.6f}"))
    return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"
