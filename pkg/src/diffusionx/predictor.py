"""Noise-strength predictors for both tiers.

The edge tier regresses a strength from the previous and current prompt
embeddings; the cloud tier fuses a higher-capacity text embedding with an
image embedding of the draft. Both share one MLP core: affine layers with
ReLU hidden activations and a linear scalar output, trained by plain
mini-batch gradient descent on mean squared error plus an L2 penalty over
the weight matrices (never the biases). Setting the penalty weight to zero
recovers the plain MSE objective exactly.

Numerics: all math runs in float64, but parameters are kept on the float32
lattice (initialization and every update round-trip through float32). The
weight file stores float32, so save/load is bit-exact for any parameters
produced by this module, while float64 computation keeps analytic gradients
within finite-difference tolerance.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .core import GRID_MAX, GRID_MIN, CandidateSet, clip_strength
from .errors import DimensionMismatch

WEIGHTS_FORMAT_VERSION = 1
WEIGHTS_MAGIC = b"MLPW"

# Default shapes: the edge net is deliberately small, the cloud net deeper.
EDGE_HIDDEN = (256, 64)
CLOUD_HIDDEN = (512, 256, 64)


class DivergenceDetected(RuntimeError):
    """Training loss became non-finite."""


class FormatVersionMismatch(ValueError):
    """Weight file is truncated, corrupt, or from an unknown format version."""


class ShapeMismatch(ValueError):
    """Weight file contents do not match the declared layer dimensions."""


def _f32_lattice(a: np.ndarray) -> np.ndarray:
    # Keep values exactly representable in float32 so serialization is lossless.
    return a.astype(np.float32).astype(np.float64)


@dataclass
class MlpParams:
    layer_dims: Tuple[int, ...]
    weights: List[np.ndarray] = field(repr=False)  # layer i: (dims[i+1], dims[i])
    biases: List[np.ndarray] = field(repr=False)
    activation: str = "relu"

    def __post_init__(self) -> None:
        if len(self.layer_dims) < 2:
            raise ShapeMismatch("need at least an input and an output layer")
        if any(d < 1 for d in self.layer_dims):
            raise ShapeMismatch("layer dims must be positive")
        if self.layer_dims[-1] != 1:
            raise ShapeMismatch("output layer must be scalar")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        expected = list(zip(self.layer_dims[1:], self.layer_dims[:-1]))
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != expected[i] or b.shape != (expected[i][0],):
                raise ShapeMismatch(
                    f"layer {i}: weight {w.shape} / bias {b.shape} do not chain with dims {self.layer_dims}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    def copy(self) -> "MlpParams":
        return MlpParams(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


@dataclass(frozen=True)
class TrainingExample:
    features: np.ndarray
    label: float

    def __post_init__(self) -> None:
        if not (GRID_MIN <= self.label <= GRID_MAX):
            raise ValueError(f"label {self.label} outside the strength range [{GRID_MIN}, {GRID_MAX}]")


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    lam: float = 1e-4  # L2 penalty weight; 0 reduces to plain MSE
    seed: int = 0
    regularizer: str = "l2"

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, epochs and batch_size must be positive")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.regularizer != "l2":
            raise ValueError(f"unsupported regularizer {self.regularizer!r}")


def init_params(layer_dims: Sequence[int], seed: int) -> MlpParams:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    dims = tuple(int(d) for d in layer_dims)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(_f32_lattice(rng.uniform(-bound, bound, size=(fan_out, fan_in))))
        biases.append(_f32_lattice(rng.uniform(-bound, bound, size=fan_out)))
    return MlpParams(layer_dims=dims, weights=weights, biases=biases)


def edge_default_dims(embed_dim: int) -> Tuple[int, ...]:
    return (3 * embed_dim, *EDGE_HIDDEN, 1)


def cloud_default_dims(text_dim: int, image_dim: int) -> Tuple[int, ...]:
    return (text_dim + image_dim, *CLOUD_HIDDEN, 1)


def edge_features(h_prev: np.ndarray, h_curr: np.ndarray) -> np.ndarray:
    """Feature layout for the edge predictor: [previous, current, current - previous]."""
    if len(h_prev) != len(h_curr):
        raise DimensionMismatch(f"embedding dims differ: {len(h_prev)} vs {len(h_curr)}")
    return np.concatenate([h_prev, h_curr, h_curr - h_prev])


def fuse_multimodal(h_text: np.ndarray, v_image: np.ndarray) -> np.ndarray:
    """Cloud feature: text embedding concatenated with the image embedding."""
    h = np.asarray(h_text, dtype=np.float64)
    v = np.asarray(v_image, dtype=np.float64)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(v))):
        raise ValueError("multimodal inputs must be finite")
    return np.concatenate([h, v])


def forward_batch(params: MlpParams, X: np.ndarray) -> np.ndarray:
    """Raw (pre-clip) predictions for a feature matrix of shape (N, input_dim)."""
    if X.ndim != 2 or X.shape[1] != params.layer_dims[0]:
        raise DimensionMismatch(
            f"feature matrix {X.shape} does not match input dim {params.layer_dims[0]}"
        )
    a = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        a = z if i == last else np.maximum(z, 0.0)
    return a[:, 0]


def mlp_forward(params: MlpParams, x: np.ndarray) -> float:
    """Raw scalar output for one feature vector (clip separately)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or len(x) != params.layer_dims[0]:
        raise DimensionMismatch(f"feature length {x.shape} != input dim {params.layer_dims[0]}")
    return float(forward_batch(params, x[None, :])[0])


def _gradient_arrays(
    params: MlpParams, X: np.ndarray, y: np.ndarray, lam: float
) -> Tuple[List[np.ndarray], List[np.ndarray], float]:
    n = len(X)
    activations = [X]
    pre_acts = []
    a = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        pre_acts.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        activations.append(a)
    out = activations[-1][:, 0]

    residual = out - y
    mse = float(residual @ residual) / n
    penalty = lam * float(sum(np.sum(w * w) for w in params.weights))
    loss = mse + penalty

    grads_w = [np.empty_like(w) for w in params.weights]
    grads_b = [np.empty_like(b) for b in params.biases]
    delta = (2.0 / n) * residual[:, None]
    for i in range(last, -1, -1):
        grads_w[i] = delta.T @ activations[i] + 2.0 * lam * params.weights[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i]) * (pre_acts[i - 1] > 0.0)
    return grads_w, grads_b, loss


def mlp_gradient(
    params: MlpParams, batch: Sequence[TrainingExample], lam: float = 0.0
) -> Tuple[List[np.ndarray], List[np.ndarray], float]:
    """Analytic loss gradients over a batch.

    Loss = mean((raw_prediction - label)^2) + lam * sum_layers ||W||_F^2.
    Returns (weight grads, bias grads, loss value).
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    X = np.stack([np.asarray(ex.features, dtype=np.float64) for ex in batch])
    y = np.asarray([ex.label for ex in batch], dtype=np.float64)
    return _gradient_arrays(params, X, y, lam)


def train(
    params: MlpParams, dataset: Sequence[TrainingExample], cfg: TrainingConfig
) -> Tuple[MlpParams, List[float]]:
    """Mini-batch gradient descent with per-epoch reshuffling.

    Deterministic given (params, dataset, cfg). Returns the trained
    parameters and the per-epoch mean batch loss.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    X = np.stack([np.asarray(ex.features, dtype=np.float64) for ex in dataset])
    y = np.asarray([ex.label for ex in dataset], dtype=np.float64)
    n = len(dataset)
    rng = np.random.default_rng(cfg.seed)
    params = params.copy()
    history: List[float] = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            grads_w, grads_b, loss = _gradient_arrays(params, X[idx], y[idx], cfg.lam)
            if not np.isfinite(loss):
                raise DivergenceDetected(f"loss became non-finite ({loss})")
            for i in range(len(params.weights)):
                params.weights[i] = _f32_lattice(params.weights[i] - cfg.learning_rate * grads_w[i])
                params.biases[i] = _f32_lattice(params.biases[i] - cfg.learning_rate * grads_b[i])
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
    return params, history


def predict_edge_strength(
    params: MlpParams, h_prev: np.ndarray, h_curr: np.ndarray, grid: CandidateSet
) -> float:
    return clip_strength(mlp_forward(params, edge_features(h_prev, h_curr)), grid)


def predict_cloud_strength(
    params: MlpParams, h_text: np.ndarray, v_image: np.ndarray, grid: CandidateSet
) -> float:
    return clip_strength(mlp_forward(params, fuse_multimodal(h_text, v_image)), grid)


def weight_norm(params: MlpParams) -> float:
    """Frobenius norm over all weight matrices (regularization target)."""
    return float(np.sqrt(sum(np.sum(w * w) for w in params.weights)))


def save_weights(params: MlpParams, path: str) -> None:
    """Binary weight file: magic, JSON header, float32 LE payload, CRC32 trailer."""
    header = json.dumps(
        {
            "format_version": WEIGHTS_FORMAT_VERSION,
            "layer_dims": list(params.layer_dims),
            "activation": params.activation,
        },
        sort_keys=True,
    ).encode("utf-8")
    payload = b"".join(
        w.astype("<f4").tobytes() + b.astype("<f4").tobytes()
        for w, b in zip(params.weights, params.biases)
    )
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_weights(path: str) -> MlpParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != WEIGHTS_MAGIC:
        raise FormatVersionMismatch("not a recognizable weight file")
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise FormatVersionMismatch("truncated header")
    try:
        header = json.loads(blob[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatVersionMismatch("unreadable header") from exc
    if header.get("format_version") != WEIGHTS_FORMAT_VERSION:
        raise FormatVersionMismatch(f"unsupported format version {header.get('format_version')}")
    dims = tuple(int(d) for d in header.get("layer_dims", ()))
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ShapeMismatch(f"invalid layer dims {dims}")
    expected_floats = sum(dims[i + 1] * dims[i] + dims[i + 1] for i in range(len(dims) - 1))
    body = blob[8 + header_len :]
    if len(body) < expected_floats * 4 + 4:
        raise FormatVersionMismatch("truncated payload")
    if len(body) > expected_floats * 4 + 4:
        raise ShapeMismatch("payload larger than the declared shapes")
    payload, (crc,) = body[:-4], struct.unpack("<I", body[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise FormatVersionMismatch("payload checksum mismatch")
    weights, biases = [], []
    offset = 0
    flat = np.frombuffer(payload, dtype="<f4")
    for i in range(len(dims) - 1):
        w_count = dims[i + 1] * dims[i]
        weights.append(
            flat[offset : offset + w_count].astype(np.float64).reshape(dims[i + 1], dims[i])
        )
        offset += w_count
        biases.append(flat[offset : offset + dims[i + 1]].astype(np.float64))
        offset += dims[i + 1]
    return MlpParams(
        layer_dims=dims, weights=weights, biases=biases, activation=header.get("activation", "relu")
    )
