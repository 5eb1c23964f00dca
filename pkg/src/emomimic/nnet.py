"""Feed-forward network core shared by the recognizer and synthesizer models.

Deliberately minimal: affine layers with tanh or identity activations,
mini-batch SGD on (optionally weighted) mean squared error, finite-difference
gradient checking, and an exact-round-trip JSON model container. Everything
is seeded and summation order is fixed, so training is bit-reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

MODEL_FORMAT = "emomimic-network"
MODEL_VERSION = 1

ACTIVATIONS = {
    "tanh": (np.tanh, lambda a: 1.0 - a * a),
    "identity": (lambda z: z, lambda a: np.ones_like(a)),
}


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite during training."""


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "tanh"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.input_dim} -> {self.output_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}, expected one of {sorted(ACTIVATIONS)}")


def mlp_spec(input_dim: int, hidden: Sequence[int], output_dim: int) -> list[LayerSpec]:
    """Tanh hidden layers with an identity output layer."""
    dims = [input_dim, *hidden, output_dim]
    layers = [LayerSpec(dims[i], dims[i + 1], "tanh") for i in range(len(dims) - 2)]
    layers.append(LayerSpec(dims[-2], dims[-1], "identity"))
    return layers


@dataclass
class NetworkParams:
    spec: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    rng_seed: int

    def __post_init__(self):
        if len(self.spec) != len(self.weights) or len(self.spec) != len(self.biases):
            raise ValueError("spec/weights/biases length mismatch")
        for i, (ls, w, b) in enumerate(zip(self.spec, self.weights, self.biases)):
            if w.shape != (ls.output_dim, ls.input_dim) or b.shape != (ls.output_dim,):
                raise ValueError(f"layer {i}: parameter shapes {w.shape}/{b.shape} do not match spec {ls}")
            if i > 0 and ls.input_dim != self.spec[i - 1].output_dim:
                raise ValueError(f"layer {i}: input dim {ls.input_dim} does not chain from previous layer")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    @property
    def input_dim(self) -> int:
        return self.spec[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.spec[-1].output_dim


def init_network(spec: Sequence[LayerSpec], rng_seed: int) -> NetworkParams:
    """Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(rng_seed)
    weights, biases = [], []
    for ls in spec:
        bound = np.sqrt(6.0 / (ls.input_dim + ls.output_dim))
        weights.append(rng.uniform(-bound, bound, size=(ls.output_dim, ls.input_dim)))
        biases.append(np.zeros(ls.output_dim))
    return NetworkParams(list(spec), weights, biases, rng_seed)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Run the network on one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"input shape {x.shape} does not match network input dim {params.input_dim}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite network input")
    return _forward_batch(params, x[None, :])[0]


def _forward_batch(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    a = x
    for ls, w, b in zip(params.spec, params.weights, params.biases):
        act, _ = ACTIVATIONS[ls.activation]
        a = act(a @ w.T + b)
    return a


def _forward_cached(params: NetworkParams, x: np.ndarray) -> list[np.ndarray]:
    """Activations per layer, input first, for backprop."""
    acts = [x]
    for ls, w, b in zip(params.spec, params.weights, params.biases):
        act, _ = ACTIVATIONS[ls.activation]
        acts.append(act(acts[-1] @ w.T + b))
    return acts


def _backprop(
    params: NetworkParams, acts: list[np.ndarray], grad_out: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of a scalar loss given d(loss)/d(output)."""
    grads_w = [np.empty(0)] * len(params.spec)
    grads_b = [np.empty(0)] * len(params.spec)
    delta = grad_out
    for i in reversed(range(len(params.spec))):
        _, dact = ACTIVATIONS[params.spec[i].activation]
        delta = delta * dact(acts[i + 1])
        grads_w[i] = delta.T @ acts[i]
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ params.weights[i]
    return grads_w, grads_b


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    batch_size: int = 16
    epochs: int = 100
    rng_seed: int = 0
    validation_fraction: float = 0.0
    x_mean: Optional[np.ndarray] = None
    x_std: Optional[np.ndarray] = None
    y_mean: Optional[np.ndarray] = None
    y_std: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in [0, 1)")


@dataclass
class TrainedNetwork:
    """Network parameters plus the standardization applied around them."""

    params: NetworkParams
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray
    loss_history: list[float] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forward pass in raw feature space (standardize, run, de-standardize)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        xs = (np.atleast_2d(x) - self.x_mean) / self.x_std
        ys = _forward_batch(self.params, xs)
        y = ys * self.y_std + self.y_mean
        return y[0] if single else y


def _standardization(data: np.ndarray, mean, std) -> tuple[np.ndarray, np.ndarray]:
    mean = np.mean(data, axis=0) if mean is None else np.asarray(mean, dtype=np.float64)
    std = np.std(data, axis=0) if std is None else np.asarray(std, dtype=np.float64)
    return mean, np.maximum(std, 1e-8)


def train(
    spec: Sequence[LayerSpec],
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig,
    sample_weight: Optional[np.ndarray] = None,
) -> TrainedNetwork:
    """Mini-batch SGD on (weighted) MSE over standardized inputs and targets.

    Deterministic for a fixed config: seeded init, seeded shuffle, and
    in-order batch summation. Raises TrainingDivergedError on NaN loss.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if inputs.ndim != 2 or targets.ndim != 2 or len(inputs) != len(targets):
        raise ValueError(f"need matching 2-D inputs/targets, got {inputs.shape} and {targets.shape}")
    if len(inputs) == 0:
        raise ValueError("empty training dataset")
    if inputs.shape[1] != spec[0].input_dim or targets.shape[1] != spec[-1].output_dim:
        raise ValueError(
            f"dataset dims {inputs.shape[1]}->{targets.shape[1]} do not match "
            f"spec {spec[0].input_dim}->{spec[-1].output_dim}"
        )
    if sample_weight is None:
        sample_weight = np.ones(len(inputs))
    else:
        sample_weight = np.asarray(sample_weight, dtype=np.float64)
        if sample_weight.shape != (len(inputs),) or np.any(sample_weight <= 0):
            raise ValueError("sample_weight must be positive, one value per sample")

    x_mean, x_std = _standardization(inputs, cfg.x_mean, cfg.x_std)
    y_mean, y_std = _standardization(targets, cfg.y_mean, cfg.y_std)
    xs = (inputs - x_mean) / x_std
    ys = (targets - y_mean) / y_std

    params = init_network(spec, cfg.rng_seed)
    rng = np.random.default_rng(cfg.rng_seed)
    n, d_out = ys.shape
    w_total = float(np.sum(sample_weight))
    history = []
    sample_sse = np.zeros(n)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for b0 in range(0, n, cfg.batch_size):
            idx = order[b0 : b0 + cfg.batch_size]
            xb, yb, wb = xs[idx], ys[idx], sample_weight[idx]
            acts = _forward_cached(params, xb)
            err = acts[-1] - yb
            # accumulate in original sample order so the reported loss does
            # not depend on the shuffle
            sample_sse[idx] = wb * np.sum(err * err, axis=1)
            grad_out = (2.0 / (w_total * d_out)) * wb[:, None] * err
            grads_w, grads_b = _backprop(params, acts, grad_out)
            for i in range(len(params.weights)):
                params.weights[i] -= cfg.learning_rate * grads_w[i]
                params.biases[i] -= cfg.learning_rate * grads_b[i]
        loss = float(np.sum(sample_sse)) / (w_total * d_out)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss became non-finite at epoch {epoch}: {loss}")
        history.append(loss)
    return TrainedNetwork(params, x_mean, x_std, y_mean, y_std, history)


def _loss_and_grads(params, x, y):
    acts = _forward_cached(params, x[None, :])
    err = acts[-1] - y[None, :]
    loss = float(np.mean(err * err))
    grad_out = 2.0 * err / err.size
    return loss, _backprop(params, acts, grad_out)


def gradient_check(spec: Sequence[LayerSpec], sample: tuple, epsilon: float = 1e-5, rng_seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    The relative error uses max(|analytic|, |numeric|, 1e-8) as denominator.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError(f"epsilon must be in [1e-7, 1e-3], got {epsilon}")
    x, y = (np.asarray(v, dtype=np.float64) for v in sample)
    params = init_network(spec, rng_seed)
    _, (grads_w, grads_b) = _loss_and_grads(params, x, y)
    for g in (*grads_w, *grads_b):
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite analytic gradient")

    max_err = 0.0
    for arrays, grads in ((params.weights, grads_w), (params.biases, grads_b)):
        for arr, grad in zip(arrays, grads):
            flat, gflat = arr.ravel(), grad.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + epsilon
                lp, _ = _loss_and_grads(params, x, y)
                flat[j] = orig - epsilon
                lm, _ = _loss_and_grads(params, x, y)
                flat[j] = orig
                numeric = (lp - lm) / (2.0 * epsilon)
                denom = max(abs(gflat[j]), abs(numeric), 1e-8)
                max_err = max(max_err, abs(gflat[j] - numeric) / denom)
    return max_err


# --- serialization ---------------------------------------------------------

def network_to_dict(net: TrainedNetwork) -> dict:
    return {
        "spec": [
            {"input_dim": ls.input_dim, "output_dim": ls.output_dim, "activation": ls.activation}
            for ls in net.params.spec
        ],
        "rng_seed": net.params.rng_seed,
        "weights": [w.tolist() for w in net.params.weights],
        "biases": [b.tolist() for b in net.params.biases],
        "x_mean": net.x_mean.tolist(),
        "x_std": net.x_std.tolist(),
        "y_mean": net.y_mean.tolist(),
        "y_std": net.y_std.tolist(),
        "loss_history": net.loss_history,
    }


def network_from_dict(d: dict) -> TrainedNetwork:
    spec = [LayerSpec(ls["input_dim"], ls["output_dim"], ls["activation"]) for ls in d["spec"]]
    params = NetworkParams(
        spec,
        [np.asarray(w, dtype=np.float64) for w in d["weights"]],
        [np.asarray(b, dtype=np.float64) for b in d["biases"]],
        int(d["rng_seed"]),
    )
    return TrainedNetwork(
        params,
        np.asarray(d["x_mean"], dtype=np.float64),
        np.asarray(d["x_std"], dtype=np.float64),
        np.asarray(d["y_mean"], dtype=np.float64),
        np.asarray(d["y_std"], dtype=np.float64),
        list(d["loss_history"]),
    )


def save_network(net: TrainedNetwork, path, config_checksum: str = "") -> None:
    """Write the versioned JSON model container (floats round-trip exactly)."""
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config_checksum": config_checksum,
        **network_to_dict(net),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc), encoding="utf-8")


def load_network(path) -> tuple[TrainedNetwork, str]:
    """Read a model container; returns (network, config_checksum)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    return network_from_dict(doc), doc.get("config_checksum", "")


def checksum_of(payload: dict) -> str:
    """Stable sha256 over a JSON-serializable mapping."""
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
