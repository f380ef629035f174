"""Flat key-value experiment configuration with dotted section names.

Format: one `key = value` per line, `#` comments, unknown keys rejected by
name. Defaults reproduce the case-study setup: 5000 m road over 240 s on a
500 x 240 grid, rho_max = 0.05 veh/m, v_free = 25 m/s, 5 sensors, 250 samples.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .physics import FdParams
from .simulation import Grid, InitialCondition
from .training import SensorLayout, TrainConfig


def _parse_floats(s: str) -> tuple:
    return tuple(float(x) for x in s.split(",") if x.strip() != "")


@dataclass
class ExperimentConfig:
    grid_x_min: float = 0.0
    grid_x_max: float = 5000.0
    grid_n_x: int = 500
    grid_t_min: float = 0.0
    grid_t_max: float = 240.0
    grid_n_t: int = 240

    fd_v_free: float = 25.0
    fd_rho_max: float = 0.05

    ic_kind: str = "wave_train"
    ic_density: float = 0.02
    ic_block_lo: float = 3000.0
    ic_block_hi: float = 4000.0
    ic_block_density: float = 0.05
    ic_background_density: float = 0.01
    ic_wave_mean: float = 0.04
    ic_wave_amplitude: float = 0.01
    ic_wave_length: float = 900.0
    ic_wave_start: float = 1200.0

    sensors_positions: tuple = (500.0, 1500.0, 2500.0, 3500.0, 4500.0)

    train_n_samples: int = 250
    train_alpha: float = 3e7
    train_n_collocation: int = 2500
    train_max_epochs: int = 6000
    train_cost_threshold: float = 1e-4
    train_hidden_layers: int = 8
    train_hidden_width: int = 20
    train_activation: str = "sin"
    train_frequency_scale: float = 10.0
    train_learning_rate: float = 1e-3
    train_beta1: float = 0.9
    train_beta2: float = 0.999
    train_eps: float = 1e-8
    train_noise_std: float = 0.0
    train_minibatch_size: int = 0

    run_seed: int = 0
    run_label: str = ""
    run_out_dir: str = "runs"

    # -- construction of domain objects --------------------------------------

    def grid(self) -> Grid:
        return Grid(self.grid_x_min, self.grid_x_max, self.grid_n_x,
                    self.grid_t_min, self.grid_t_max, self.grid_n_t)

    def fd_params(self) -> FdParams:
        return FdParams(v_free=self.fd_v_free, rho_max=self.fd_rho_max)

    def initial_condition(self) -> InitialCondition:
        return InitialCondition(kind=self.ic_kind, density=self.ic_density,
                                block_lo=self.ic_block_lo, block_hi=self.ic_block_hi,
                                block_density=self.ic_block_density,
                                background_density=self.ic_background_density,
                                wave_mean=self.ic_wave_mean,
                                wave_amplitude=self.ic_wave_amplitude,
                                wave_length=self.ic_wave_length,
                                wave_start=self.ic_wave_start)

    def sensor_layout(self) -> SensorLayout:
        return SensorLayout(positions=tuple(self.sensors_positions))

    def train_config(self, alpha=None, n_collocation=None, seed=None) -> TrainConfig:
        sizes = [2] + [self.train_hidden_width] * self.train_hidden_layers + [1]
        return TrainConfig(
            alpha=self.train_alpha if alpha is None else alpha,
            n_collocation=self.train_n_collocation if n_collocation is None else n_collocation,
            max_epochs=self.train_max_epochs,
            cost_threshold=self.train_cost_threshold,
            seed=self.run_seed if seed is None else seed,
            layer_sizes=sizes,
            activation=self.train_activation,
            frequency_scale=self.train_frequency_scale,
            learning_rate=self.train_learning_rate,
            beta1=self.train_beta1, beta2=self.train_beta2, eps=self.train_eps,
            minibatch_size=self.train_minibatch_size,
        )


def _key_of(field_name: str) -> str:
    section, _, rest = field_name.partition("_")
    return f"{section}.{rest}"


_FIELDS = {_key_of(f.name): f for f in fields(ExperimentConfig)}


def _parse_value(f, raw: str):
    raw = raw.strip()
    try:
        if f.type == "int":
            return int(raw)
        if f.type == "float":
            return float(raw)
        if f.type == "tuple":
            return _parse_floats(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {_key_of(f.name)}: {raw!r} ({e})") from None


def apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply `key=value` strings in order; unknown keys are rejected by name."""
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key = key.strip()
        f = _FIELDS.get(key)
        if f is None:
            raise ConfigError(f"unknown configuration key {key!r}")
        setattr(config, f.name, _parse_value(f, value))
    return config


def parse_config(text: str, config: ExperimentConfig | None = None) -> ExperimentConfig:
    config = config if config is not None else ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        apply_overrides(config, [line])
    return config


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        return parse_config(f.read())


def serialize_config(config: ExperimentConfig) -> str:
    """Canonical serialization (stable key order, full precision)."""
    lines = []
    for key, f in _FIELDS.items():
        value = getattr(config, f.name)
        if f.type == "tuple":
            value = ",".join(f"{x:.17g}" for x in value)
        elif f.type == "float":
            value = f"{value:.17g}"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()
