"""Fully connected networks on top of :mod:`acca.tensor`."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor

ACTIVATIONS = ("relu", "leaky_relu", "tanh", "sigmoid", "identity")
OUTPUTS = ("identity", "tanh", "sigmoid")


@dataclass(frozen=True)
class MlpSpec:
    """Hidden widths plus activations; input/output widths come from the data."""

    hidden: tuple[int, ...] = (256, 256)
    activation: str = "leaky_relu"
    output: str = "identity"
    slope: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if any(w < 1 for w in self.hidden):
            raise ValueError(f"layer widths must be >= 1, got {self.hidden}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.output not in OUTPUTS:
            raise ValueError(f"unknown output activation {self.output!r}")


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _activate(x: Tensor, kind: str, slope: float) -> Tensor:
    if kind == "relu":
        return T.relu(x)
    if kind == "leaky_relu":
        return T.leaky_relu(x, slope)
    if kind == "tanh":
        return T.tanh(x)
    if kind == "sigmoid":
        return T.sigmoid(x)
    return x


@dataclass
class Mlp:
    in_dim: int
    out_dim: int
    spec: MlpSpec
    weights: list[Tensor] = field(default_factory=list)
    biases: list[Tensor] = field(default_factory=list)

    @classmethod
    def build(cls, in_dim: int, out_dim: int, spec: MlpSpec, rng: np.random.Generator) -> "Mlp":
        widths = [in_dim, *spec.hidden, out_dim]
        net = cls(in_dim, out_dim, spec)
        for fi, fo in zip(widths[:-1], widths[1:]):
            net.weights.append(Tensor(glorot_uniform(fi, fo, rng), requires_grad=True))
            net.biases.append(Tensor(np.zeros((1, fo)), requires_grad=True))
        return net

    def __call__(self, x) -> Tensor:
        h = T.tensor(x)
        if h.ndim != 2 or h.shape[1] != self.in_dim:
            raise T.ShapeError(f"Mlp expects (n, {self.in_dim}) input, got {h.shape}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = T.add(T.matmul(h, w), b)
            kind = self.spec.output if i == last else self.spec.activation
            h = _activate(h, kind, self.spec.slope)
        return h

    def logits(self, x) -> Tensor:
        """Forward pass with the output activation skipped."""
        h = T.tensor(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = T.add(T.matmul(h, w), b)
            if i != last:
                h = _activate(h, self.spec.activation, self.spec.slope)
        return h

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}layer{i}.weight"] = w
            out[f"{prefix}layer{i}.bias"] = b
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())
