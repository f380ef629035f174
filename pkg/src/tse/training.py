"""Experimental protocol: sensor placement, sparse observation sampling,
collocation sampling, and the two-term training loop (data cost + weighted
physics cost) with Adam and a cost-threshold stopping rule.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import network as nn
from .autodiff import Tensor
from .errors import ConfigError, ContractError, NumericError
from .network import MlpNetwork, NetworkGraph, Scaling
from .physics import FdParams
from .simulation import Grid, VelocityField


def seed_streams(root_seed: int) -> dict[str, np.random.Generator]:
    """Split one root seed into independent, reproducible RNG streams."""
    init_ss, obs_ss, coll_ss = np.random.SeedSequence(root_seed).spawn(3)
    return {
        "init": np.random.default_rng(init_ss),
        "observations": np.random.default_rng(obs_ss),
        "collocation": np.random.default_rng(coll_ss),
    }


@dataclass(frozen=True)
class SensorLayout:
    """Loop-detector positions, snapped to cell centers at sampling time."""

    positions: tuple = (500.0, 1500.0, 2500.0, 3500.0, 4500.0)

    def validate(self, grid: Grid):
        pos = self.positions
        if any(not (grid.x_min < x < grid.x_max) for x in pos):
            raise ConfigError("sensor positions must lie strictly inside the domain")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ConfigError("sensor positions must be strictly increasing")

    def cell_indices(self, grid: Grid) -> np.ndarray:
        self.validate(grid)
        idx = ((np.asarray(self.positions) - grid.x_min) // grid.dx).astype(int)
        return np.minimum(idx, grid.n_x - 1)

    def snapped_positions(self, grid: Grid) -> np.ndarray:
        return grid.x_centers[self.cell_indices(grid)]


@dataclass(frozen=True)
class ObservationSet:
    """Labeled points (x, t, v) on the sensor-by-time lattice."""

    x: np.ndarray
    t: np.ndarray
    v: np.ndarray

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class CollocationSet:
    """Unlabeled residual points; continuous positions, not grid-snapped."""

    x: np.ndarray
    t: np.ndarray

    def __len__(self):
        return len(self.x)


@dataclass
class TrainConfig:
    alpha: float = 1.0
    n_collocation: int = 10_000
    max_epochs: int = 20_000
    cost_threshold: float = 1e-4
    seed: int = 0
    layer_sizes: list[int] = field(default_factory=lambda: [2] + [20] * 8 + [1])
    activation: str = "tanh"
    frequency_scale: float = 10.0  # first-layer init reach of sin nets
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    minibatch_size: int = 0  # 0 = full batch (default)

    def validate(self):
        if self.alpha < 0:
            raise ConfigError("alpha must be >= 0")
        if self.cost_threshold <= 0:
            raise ConfigError("cost_threshold must be positive")
        if self.max_epochs < 0:
            raise ConfigError("max_epochs must be >= 0")
        if self.n_collocation < 0:
            raise ConfigError("n_collocation must be >= 0")
        if self.activation not in nn.ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.frequency_scale <= 0:
            raise ConfigError("frequency_scale must be positive")


def sample_observations(fld: VelocityField, layout: SensorLayout, n_samples: int,
                        seed, noise_std: float = 0.0) -> ObservationSet:
    """Uniform sampling without replacement from the sensor-by-time lattice.

    Values are exact ground-truth field values unless noise_std > 0.
    """
    grid = fld.grid
    rows = layout.cell_indices(grid)
    lattice = grid.n_t * len(rows)
    if n_samples > lattice:
        raise ConfigError(f"n_samples={n_samples} exceeds lattice size {lattice}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    flat = np.sort(rng.choice(lattice, size=n_samples, replace=False))
    sensor_idx = flat // grid.n_t
    time_idx = flat % grid.n_t
    x = grid.x_centers[rows[sensor_idx]]
    t = grid.times[time_idx]
    v = fld.values[rows[sensor_idx], time_idx].astype(np.float64)
    if noise_std > 0:
        v = v + rng.normal(0.0, noise_std, size=v.shape)
    return ObservationSet(x=x, t=t, v=v)


def sample_collocation(grid: Grid, n_c: int, seed) -> CollocationSet:
    """Uniform random points over the continuous space-time rectangle."""
    if n_c < 0:
        raise ConfigError("n_c must be >= 0")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = rng.uniform(grid.x_min, grid.x_max, size=n_c)
    t = rng.uniform(grid.t_min, grid.t_max, size=n_c)
    return CollocationSet(x=x, t=t)


# -- cost terms --------------------------------------------------------------

def _data_cost_tensor(graph: NetworkGraph, obs: ObservationSet, scaling: Scaling) -> Tensor:
    if len(obs) == 0:
        raise ContractError("data cost needs at least one observation")
    x_norm = scaling.norm_points(obs.x, obs.t)
    raw = graph.output(x_norm)
    v_pred = scaling.v_free * raw
    target = graph.tape.constant(obs.v.reshape(-1, 1))
    return (v_pred - target).square().mean()


def _physics_cost_tensor(graph: NetworkGraph, coll: CollocationSet,
                         p: FdParams, scaling: Scaling) -> Tensor:
    if len(coll) == 0:
        raise ContractError("physics cost needs at least one collocation point")
    x_norm = scaling.norm_points(coll.x, coll.t)
    raw, gx, gt = graph.output_with_input_grads(x_norm)
    v = scaling.v_free * raw
    dv_dx = (scaling.v_free * scaling.dxnorm_dx) * gx
    dv_dt = (scaling.v_free * scaling.dtnorm_dt) * gt
    coef = 1.0 - (2.0 / p.v_free) * v
    residual = p.rho_max * (coef * dv_dx) - (p.rho_max / p.v_free) * dv_dt
    return residual.square().mean()


def data_cost(net: MlpNetwork, obs: ObservationSet, scaling: Scaling) -> float:
    """Mean squared error over observations, in physical (m/s)^2."""
    return _data_cost_tensor(NetworkGraph(net), obs, scaling).item()


def physics_cost(net: MlpNetwork, coll: CollocationSet, p: FdParams, scaling: Scaling) -> float:
    """Mean squared conservation-law residual over collocation points."""
    return _physics_cost_tensor(NetworkGraph(net), coll, p, scaling).item()


def total_cost(net: MlpNetwork, obs: ObservationSet, coll: CollocationSet,
               alpha: float, p: FdParams, scaling: Scaling) -> tuple[float, float, float]:
    """Combined cost; returns (total, data term, physics term)."""
    j_dl = data_cost(net, obs, scaling)
    j_phy = physics_cost(net, coll, p, scaling) if (alpha != 0 and len(coll) > 0) else 0.0
    return j_dl + alpha * j_phy, j_dl, j_phy


# -- training loop -----------------------------------------------------------

@dataclass
class TrainResult:
    net: MlpNetwork
    history: list[tuple[int, float, float, float]]  # (epoch, j_dl, j_phy, j_total)
    wall_time: float
    terminated_by: str  # "threshold" | "max_epochs"
    epochs_run: int


def train(config: TrainConfig, obs: ObservationSet, coll: CollocationSet,
          p: FdParams, scaling: Scaling, net: MlpNetwork | None = None,
          eval_hook=None, eval_every: int = 0) -> TrainResult:
    """Full-batch gradient descent on J_DL + alpha * J_PHY.

    Stops when the total cost drops below the threshold or the epoch budget
    is exhausted. Deterministic for a fixed config, observation set and
    collocation set. With alpha == 0 (or no collocation points, or an empty
    budget) the physics graph is never constructed, so the plain-data
    baseline is a strict special case of the same loop.

    ``eval_hook(epoch, net)``, if given, is called every ``eval_every``
    epochs for out-of-band monitoring; it must not mutate the network.
    """
    config.validate()
    if len(obs) == 0:
        raise ContractError("training needs a nonempty observation set")
    if net is None:
        net = nn.initialize(config.layer_sizes, seed_streams(config.seed)["init"],
                            config.activation, config.frequency_scale)
    else:
        net = net.copy()
    use_physics = config.alpha != 0 and len(coll) > 0
    batch_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(4)[3]) \
        if config.minibatch_size else None

    adam = nn.adam_init(net.parameters(), lr=config.learning_rate,
                        beta1=config.beta1, beta2=config.beta2, eps=config.eps)
    history: list[tuple[int, float, float, float]] = []
    terminated_by = "max_epochs"
    start = time.perf_counter()
    for epoch in range(config.max_epochs):
        obs_batch, coll_batch = obs, coll
        if batch_rng is not None:
            k = min(config.minibatch_size, len(obs))
            sel = np.sort(batch_rng.choice(len(obs), size=k, replace=False))
            obs_batch = ObservationSet(obs.x[sel], obs.t[sel], obs.v[sel])
            if use_physics:
                kc = min(config.minibatch_size, len(coll))
                selc = np.sort(batch_rng.choice(len(coll), size=kc, replace=False))
                coll_batch = CollocationSet(coll.x[selc], coll.t[selc])

        graph = NetworkGraph(net)
        j_dl_t = _data_cost_tensor(graph, obs_batch, scaling)
        if use_physics:
            j_phy_t = _physics_cost_tensor(graph, coll_batch, p, scaling)
            loss = j_dl_t + config.alpha * j_phy_t
            j_phy = j_phy_t.item()
        else:
            loss = j_dl_t
            j_phy = 0.0
        j_dl = j_dl_t.item()
        j_total = loss.item()
        if not np.isfinite(j_total):
            raise NumericError(
                f"non-finite cost at epoch {epoch}: j_dl={j_dl}, j_phy={j_phy}")
        history.append((epoch, j_dl, j_phy, j_total))
        if eval_hook is not None and eval_every > 0 and epoch % eval_every == 0:
            eval_hook(epoch, net)
        if j_total < config.cost_threshold:
            terminated_by = "threshold"
            break
        grads = nn.parameter_gradient(loss, graph)
        nn.adam_step(adam, net.parameters(), grads)
    wall = time.perf_counter() - start
    return TrainResult(net=net, history=history, wall_time=wall,
                       terminated_by=terminated_by, epochs_run=len(history))


def history_to_csv(result: TrainResult, path, elapsed_per_epoch: bool = True):
    """Training history CSV: epoch,j_dl,j_phy,j_total,elapsed_seconds.

    Elapsed time is reported as the run-level wall time apportioned per epoch
    (per-epoch timestamps are not recorded individually).
    """
    n = max(1, result.epochs_run)
    lines = ["epoch,j_dl,j_phy,j_total,elapsed_seconds"]
    for epoch, j_dl, j_phy, j_total in result.history:
        elapsed = result.wall_time * (epoch + 1) / n
        lines.append(f"{epoch},{j_dl:.17g},{j_phy:.17g},{j_total:.17g},{elapsed:.6f}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
