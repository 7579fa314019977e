"""Input-response autoencoder used as the latent-space map.

Inputs and responses are fused column-wise, scaled into the sigmoid range,
and the network is trained to reproduce its own input under mean squared
error. Only the encoder half is consumed downstream; the trained network
is frozen afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceDetectedError, EmptyInputError, ShapeMismatchError
from .mathcore import ColumnScaler, RandomSource, sigmoid
from .problem import LabeledDataset


@dataclass(frozen=True)
class FusedMatrix:
    """Scaled n x (nr+1) training matrix: input columns plus the response."""

    data: np.ndarray
    scaler: ColumnScaler

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def fuse_dataset(
    ds: LabeledDataset,
    input_target: tuple[float, float] = (0.35, 0.65),
    response_target: tuple[float, float] = (0.05, 0.95),
) -> FusedMatrix:
    """Stack inputs with responses and scale each column into sigmoid range.

    The response column gets a wider span than the input columns so the
    reconstruction objective weights response accuracy heavily; with equal
    spans the single response column is 1 of nr+1 equal terms and the
    learned latents barely constrain it.
    """
    if ds.n < 2:
        raise EmptyInputError("fusing needs at least 2 labeled samples")
    raw = np.hstack([ds.x, ds.y[:, None]])
    a = np.array([input_target[0]] * ds.nr + [response_target[0]])
    b = np.array([input_target[1]] * ds.nr + [response_target[1]])
    scaler = ColumnScaler.fit(raw, (a, b))
    return FusedMatrix(data=scaler.apply(raw), scaler=scaler)


@dataclass
class AutoencoderNet:
    """Symmetric dense network with a sigmoid at every layer.

    ``layer_dims[0] == layer_dims[-1]`` is the fused width, and
    ``layer_dims[latent_index]`` is the latent dimensionality. ``weights[i]``
    maps layer i to layer i+1 and has shape (dims[i+1], dims[i]).
    """

    layer_dims: list[int]
    latent_index: int
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    scaler: ColumnScaler
    encoder_activation: str = "sigmoid"
    decoder_activation: str = "sigmoid"

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def latent_dim(self) -> int:
        return self.layer_dims[self.latent_index]

    def encode(self, rows_scaled: np.ndarray) -> np.ndarray:
        """Batch encoder pass on already-scaled rows."""
        a = _check_batch(rows_scaled, self.input_dim)
        for w, b in zip(self.weights[: self.latent_index], self.biases[: self.latent_index]):
            a = sigmoid(a @ w.T + b)
        return a

    def decode(self, latents: np.ndarray) -> np.ndarray:
        a = _check_batch(latents, self.latent_dim)
        for w, b in zip(self.weights[self.latent_index :], self.biases[self.latent_index :]):
            a = sigmoid(a @ w.T + b)
        return a

    def reconstruct(self, rows_scaled: np.ndarray) -> np.ndarray:
        return self.decode(self.encode(rows_scaled))


def _check_batch(a: np.ndarray, width: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[1] != width:
        raise ShapeMismatchError(f"expected batch with {width} columns, got shape {a.shape}")
    return a


def encoder_forward(net: AutoencoderNet, row: np.ndarray) -> np.ndarray:
    """Single already-scaled fused row -> latent vector."""
    row = np.asarray(row, dtype=float)
    if row.ndim != 1 or row.shape[0] != net.input_dim:
        raise ShapeMismatchError(f"expected row of length {net.input_dim}, got {row.shape}")
    return net.encode(row[None, :])[0]


def decoder_forward(net: AutoencoderNet, latent: np.ndarray) -> np.ndarray:
    """Latent vector -> reconstructed (scaled) fused row."""
    latent = np.asarray(latent, dtype=float)
    if latent.ndim != 1 or latent.shape[0] != net.latent_dim:
        raise ShapeMismatchError(f"expected latent of length {net.latent_dim}, got {latent.shape}")
    return net.decode(latent[None, :])[0]


def encode_latent(net: AutoencoderNet, fused_rows: np.ndarray) -> np.ndarray:
    """Encode unscaled fused rows (k x (nr+1)); applies the net's scaler."""
    fused_rows = np.asarray(fused_rows, dtype=float)
    if fused_rows.ndim != 2 or fused_rows.shape[1] != net.input_dim:
        raise ShapeMismatchError(
            f"expected {net.input_dim} fused columns, got shape {fused_rows.shape}"
        )
    if fused_rows.shape[0] == 0:
        return np.empty((0, net.latent_dim))
    return net.encode(net.scaler.apply(fused_rows))


def reconstruction_loss(net: AutoencoderNet, d: FusedMatrix) -> float:
    """Mean over rows of the squared Euclidean reconstruction error."""
    recon = net.reconstruct(d.data)
    return float(np.mean(np.sum((d.data - recon) ** 2, axis=1)))


# -- training ---------------------------------------------------------------


@dataclass
class AdamState:
    """Adam accumulators for one list of parameter arrays."""

    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    t: int = 0

    def init(self, params: list[np.ndarray]) -> None:
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.step_size * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def glorot_init(
    layer_dims: list[int], rng: RandomSource
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-lim, lim, size=fan_out * fan_in).reshape(fan_out, fan_in)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return weights, biases


def loss_and_grads(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    data: np.ndarray,
    targets: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Full-batch MSE loss and its gradients through the sigmoid stack.

    Loss is mean over rows of the squared Euclidean error, so gradients
    carry the 2/n factor. ``targets`` defaults to ``data`` (autoencoding).
    """
    if targets is None:
        targets = data
    n = data.shape[0]
    activations = [data]
    a = data
    for w, b in zip(weights, biases):
        a = sigmoid(a @ w.T + b)
        activations.append(a)
    diff = activations[-1] - targets
    loss = float(np.mean(np.sum(diff * diff, axis=1)))

    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    delta = (2.0 / n) * diff * activations[-1] * (1.0 - activations[-1])
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = delta.T @ activations[layer]
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            a_prev = activations[layer]
            delta = (delta @ weights[layer]) * a_prev * (1.0 - a_prev)
    return loss, grad_w, grad_b


def train_autoencoder(
    d: FusedMatrix,
    layer_dims: list[int],
    latent_index: int,
    rng: RandomSource,
    adam: AdamState | None = None,
    max_epochs: int = 5000,
    stall_window: int = 200,
    stall_tolerance: float = 1e-7,
) -> tuple[AutoencoderNet, np.ndarray]:
    """Train by full-batch backprop with Adam; returns (net, loss trace).

    Stops early once the best loss has not improved by ``stall_tolerance``
    within ``stall_window`` epochs.
    """
    if max_epochs < 1:
        raise ValueError("max_epochs must be at least 1")
    if layer_dims[0] != d.width or layer_dims[-1] != d.width:
        raise ShapeMismatchError(
            f"first/last layer dims must equal the fused width {d.width}, got {layer_dims}"
        )
    if not 0 < latent_index < len(layer_dims) - 1:
        raise ShapeMismatchError("latent_index must point at an interior layer")

    weights, biases = glorot_init(layer_dims, rng)
    adam = adam if adam is not None else AdamState()
    adam.init(weights + biases)

    trace = []
    best = np.inf
    best_epoch = 0
    for epoch in range(max_epochs):
        loss, grad_w, grad_b = loss_and_grads(weights, biases, d.data)
        if not np.isfinite(loss):
            raise DivergenceDetectedError(f"loss became non-finite at epoch {epoch}")
        trace.append(loss)
        if loss < best - stall_tolerance:
            best = loss
            best_epoch = epoch
        elif epoch - best_epoch >= stall_window:
            break
        if epoch == max_epochs - 1:
            break  # keep returned weights consistent with trace[-1]
        adam.step(weights + biases, grad_w + grad_b)

    net = AutoencoderNet(
        layer_dims=list(layer_dims),
        latent_index=latent_index,
        weights=weights,
        biases=biases,
        scaler=d.scaler,
    )
    return net, np.asarray(trace)
