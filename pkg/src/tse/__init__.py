"""Traffic state estimation with physics-informed deep learning.

Reconstructs a space-time vehicle-velocity field from sparse loop-detector
samples by training a small network on a data cost plus an LWR
conservation-law residual cost, with a Godunov solver providing synthetic
ground truth.
"""

from .physics import FdParams, lwr_residual, velocity_of_density, flow_of_density, density_of_velocity
from .simulation import Grid, InitialCondition, simulate
from .network import MlpNetwork, initialize
from .training import SensorLayout, TrainConfig, sample_observations, sample_collocation, train
from .metrics import evaluate_network, mse_field, relative_error

__all__ = [
    "FdParams", "lwr_residual", "velocity_of_density", "flow_of_density",
    "density_of_velocity", "Grid", "InitialCondition", "simulate",
    "MlpNetwork", "initialize", "SensorLayout", "TrainConfig",
    "sample_observations", "sample_collocation", "train",
    "evaluate_network", "mse_field", "relative_error",
]
