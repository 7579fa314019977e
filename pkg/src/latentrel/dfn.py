"""Feedforward network estimating latent coordinates from raw inputs.

The network shares the autoencoder's input-column scaling so both see the
same coordinates, and its sigmoid output layer keeps estimates inside the
latent range. There is no gradient path: training happens exclusively
through the evolutionary loop, which manipulates flattened genomes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, ShapeMismatchError
from .mathcore import ColumnScaler, sigmoid


@dataclass
class DfnNet:
    """Dense sigmoid network; ``weights[i]`` has shape (dims[i+1], dims[i])."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scaler: ColumnScaler  # input columns only, shared with the autoencoder
    hidden_activation: str = "sigmoid"
    output_activation: str = "sigmoid"

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def forward_scaled(self, a: np.ndarray) -> np.ndarray:
        """Batch pass on already-scaled inputs."""
        for w, b in zip(self.weights, self.biases):
            a = sigmoid(a @ w.T + b)
        return a

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """Batch pass on raw inputs; applies the shared scaler first."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeMismatchError(
                f"expected batch with {self.input_dim} columns, got shape {x.shape}"
            )
        if x.shape[0] == 0:
            return np.empty((0, self.output_dim))
        return self.forward_scaled(self.scaler.apply(x))


def dfn_forward(net: DfnNet, x: np.ndarray) -> np.ndarray:
    """Single raw input vector -> latent estimate."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise ShapeMismatchError(f"expected input of length {net.input_dim}, got {x.shape}")
    return net.forward_batch(x[None, :])[0]


def genome_length(layer_dims: list[int]) -> int:
    return sum(
        fan_out * fan_in + fan_out
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:])
    )


def genome_encode(net: DfnNet) -> np.ndarray:
    """Flatten to one vector: all weight matrices (row-major, layer order),
    then all bias vectors (layer order)."""
    parts = [w.ravel() for w in net.weights] + list(net.biases)
    return np.concatenate(parts)


def genome_decode(genome: np.ndarray, layer_dims: list[int], scaler: ColumnScaler) -> DfnNet:
    """Rebuild a network from a flat parameter vector."""
    genome = np.asarray(genome, dtype=float)
    expected = genome_length(layer_dims)
    if genome.ndim != 1 or genome.shape[0] != expected:
        raise LengthMismatchError(
            f"genome length {genome.shape} does not match architecture "
            f"{layer_dims} (expected {expected})"
        )
    weights, biases = [], []
    offset = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        count = fan_out * fan_in
        weights.append(genome[offset : offset + count].reshape(fan_out, fan_in))
        offset += count
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        biases.append(genome[offset : offset + fan_out])
        offset += fan_out
    return DfnNet(layer_dims=list(layer_dims), weights=weights, biases=biases, scaler=scaler)
