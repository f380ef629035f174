"""Feed-forward network for the velocity estimator, built on the tape engine.

The network maps normalized (x, t) to a normalized velocity estimate through
tanh or sin hidden layers and an identity output. Input derivatives are propagated
forward through the same tape, so losses containing them remain differentiable
with respect to the parameters (one reverse sweep gives exact second-order
cross derivatives).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Tensor
from .errors import ContractError, NumericError

log = logging.getLogger(__name__)

SATURATION_LIMIT = 30.0  # |pre-activation| above this is reported, not fatal


@dataclass(frozen=True)
class Scaling:
    """Affine maps between physical and network coordinates.

    Inputs: x_norm = 2(x - x_min)/(x_max - x_min) - 1, likewise t.
    Output: v = v_free * raw. The chain-rule factors below convert normalized
    input gradients to physical dv/dx (1/s) and dv/dt (m/s^2); forgetting them
    is the classic PINN bug, so they only exist here.
    """

    x_min: float
    x_max: float
    t_min: float
    t_max: float
    v_free: float

    @property
    def dxnorm_dx(self) -> float:
        return 2.0 / (self.x_max - self.x_min)

    @property
    def dtnorm_dt(self) -> float:
        return 2.0 / (self.t_max - self.t_min)

    def norm_x(self, x):
        return 2.0 * (np.asarray(x, dtype=np.float64) - self.x_min) / (self.x_max - self.x_min) - 1.0

    def norm_t(self, t):
        return 2.0 * (np.asarray(t, dtype=np.float64) - self.t_min) / (self.t_max - self.t_min) - 1.0

    def norm_points(self, x, t) -> np.ndarray:
        """Stack physical coordinates into an (n, 2) normalized input batch."""
        return np.column_stack([self.norm_x(x), self.norm_t(t)])


ACTIVATIONS = ("tanh", "sin")


@dataclass
class MlpNetwork:
    """Layer sizes plus weight matrices (fan_in, fan_out) and bias vectors.

    ``activation`` selects the hidden-layer nonlinearity: "tanh" (classic)
    or "sin" (periodic; much better at wave-like fields). The output layer
    is always linear.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)
    activation: str = "tanh"

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(list(self.layer_sizes),
                          [w.copy() for w in self.weights],
                          [b.copy() for b in self.biases],
                          self.activation)


def initialize(layer_sizes: list[int], seed, activation: str = "tanh",
               frequency_scale: float = 10.0) -> MlpNetwork:
    """Seeded weight initialization; zero biases.

    tanh nets get Glorot-uniform weights. sin nets get the sinusoidal-network
    scheme: first-layer weights uniform in +-frequency_scale/fan_in (setting
    the frequency reach of the net), deeper layers uniform in +-sqrt(6/fan_in).
    ``seed`` may be an int or a numpy Generator.
    """
    if len(layer_sizes) < 2 or any(n < 1 for n in layer_sizes):
        raise ContractError(f"invalid layer sizes {layer_sizes}")
    if activation not in ACTIVATIONS:
        raise ContractError(f"unknown activation {activation!r}")
    if activation == "sin" and not frequency_scale > 0:
        raise ContractError("frequency_scale must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    net = MlpNetwork(list(layer_sizes), activation=activation)
    for layer, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        if activation == "sin":
            bound = frequency_scale / fan_in if layer == 0 else np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        net.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        net.biases.append(np.zeros(fan_out))
    return net


class NetworkGraph:
    """A network bound to a tape: parameter leaves plus batched evaluation."""

    def __init__(self, net: MlpNetwork, tape: Tape | None = None):
        self.net = net
        self.tape = tape if tape is not None else Tape()
        self.weight_tensors = [self.tape.leaf(w, requires_grad=True) for w in net.weights]
        self.bias_tensors = [self.tape.leaf(b, requires_grad=True) for b in net.biases]

    def param_tensors(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weight_tensors, self.bias_tensors):
            out.append(w)
            out.append(b)
        return out

    def _check_finite(self, z: Tensor, layer: int):
        if z.value.size == 0:
            return
        # min/max reductions double as the finiteness probe (NaN poisons both)
        lo, hi = z.value.min(), z.value.max()
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise NumericError(f"non-finite pre-activation in layer {layer}")
        peak = max(abs(lo), abs(hi))
        if peak > SATURATION_LIMIT and self.net.activation == "tanh":
            log.warning("tanh saturation: |pre-activation| = %.3g in layer %d", peak, layer)

    def output(self, x_norm: np.ndarray) -> Tensor:
        """Batched forward pass; x_norm is (n, 2), result is (n, 1)."""
        sin = self.net.activation == "sin"
        a = self.tape.constant(np.asarray(x_norm, dtype=np.float64))
        n_layers = len(self.weight_tensors)
        for i in range(n_layers):
            z = a @ self.weight_tensors[i] + self.bias_tensors[i]
            self._check_finite(z, i)
            if i < n_layers - 1:
                a = z.sin() if sin else z.tanh()
            else:
                a = z
        return a

    def output_with_input_grads(self, x_norm: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """Forward pass plus exact d(out)/d(x_norm) and d(out)/d(t_norm).

        Tangents are propagated with tape operations, so they stay
        differentiable with respect to the parameters.
        """
        sin = self.net.activation == "sin"
        x_norm = np.asarray(x_norm, dtype=np.float64)
        n = x_norm.shape[0]
        a = self.tape.constant(x_norm)
        tx = self.tape.constant(np.tile([[1.0, 0.0]], (n, 1)))
        tt = self.tape.constant(np.tile([[0.0, 1.0]], (n, 1)))
        n_layers = len(self.weight_tensors)
        for i in range(n_layers):
            w = self.weight_tensors[i]
            z = a @ w + self.bias_tensors[i]
            self._check_finite(z, i)
            tx = tx @ w
            tt = tt @ w
            if i < n_layers - 1:
                if sin:
                    a = z.sin()
                    slope = z.cos()
                else:
                    a = z.tanh()
                    slope = 1.0 - a * a
                tx = slope * tx
                tt = slope * tt
            else:
                a = z
        return a, tx, tt


def forward(net: MlpNetwork, x_norm: float, t_norm: float) -> tuple[float, Tape]:
    """Scalar forward pass; returns the normalized output and the tape."""
    if not (np.isfinite(x_norm) and np.isfinite(t_norm)):
        raise ContractError("inputs must be finite")
    graph = NetworkGraph(net)
    out = graph.output(np.array([[x_norm, t_norm]]))
    return float(out.value[0, 0]), graph.tape


def input_gradients(net: MlpNetwork, x_norm: float, t_norm: float) -> tuple[float, float, Tape]:
    """Exact derivatives of the scalar output w.r.t. both inputs."""
    if not (np.isfinite(x_norm) and np.isfinite(t_norm)):
        raise ContractError("inputs must be finite")
    graph = NetworkGraph(net)
    _, dx, dt = graph.output_with_input_grads(np.array([[x_norm, t_norm]]))
    return float(dx.value[0, 0]), float(dt.value[0, 0]), graph.tape


def parameter_gradient(loss: Tensor, graph: NetworkGraph) -> list[np.ndarray]:
    """Reverse accumulation of a scalar loss w.r.t. every network parameter."""
    graph.tape.backward(loss)
    grads = []
    for p in graph.param_tensors():
        grads.append(p.grad if p.grad is not None else np.zeros_like(p.value))
    return grads


# -- Adam -----------------------------------------------------------------

@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: list[np.ndarray], lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params],
                     step=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One in-place Adam update with bias correction."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ContractError("parameter/gradient/state length mismatch")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# -- checkpoints ------------------------------------------------------------

CHECKPOINT_MAGIC = "tse-checkpoint v1"


def save_checkpoint(net: MlpNetwork, path):
    """Self-describing decimal-text checkpoint, 17 significant digits."""
    lines = [CHECKPOINT_MAGIC, "layers " + " ".join(str(n) for n in net.layer_sizes),
             f"activation {net.activation}"]
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"weight {i} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        lines.append(f"bias {i} {b.shape[0]}")
        lines.append(" ".join(f"{x:.17g}" for x in b))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> MlpNetwork:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ContractError(f"not a checkpoint file: {path}")
    sizes = [int(s) for s in lines[1].split()[1:]]
    pos = 2
    activation = "tanh"
    if pos < len(lines) and lines[pos].startswith("activation "):
        activation = lines[pos].split()[1]
        pos += 1
    if activation not in ACTIVATIONS:
        raise ContractError(f"unknown activation {activation!r} in checkpoint")
    net = MlpNetwork(sizes, activation=activation)
    for i in range(len(sizes) - 1):
        tag, idx, rows, cols = lines[pos].split()
        if tag != "weight" or int(idx) != i:
            raise ContractError(f"malformed checkpoint near line {pos + 1}")
        rows, cols = int(rows), int(cols)
        w = np.array([[float(x) for x in lines[pos + 1 + r].split()] for r in range(rows)])
        if w.shape != (rows, cols):
            raise ContractError("weight block shape mismatch")
        pos += 1 + rows
        tag, idx, n = lines[pos].split()
        if tag != "bias" or int(idx) != i:
            raise ContractError(f"malformed checkpoint near line {pos + 1}")
        b = np.array([float(x) for x in lines[pos + 1].split()])
        if b.shape != (int(n),):
            raise ContractError("bias block shape mismatch")
        pos += 2
        net.weights.append(w)
        net.biases.append(b)
    return net
