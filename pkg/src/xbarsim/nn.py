"""Tiny fully-connected network: synthetic data, a reference trainer, and
inference through simulated crossbars with integer requantization between layers."""

import csv
import json
from dataclasses import dataclass

import numpy as np

from ._validation import round_half_away
from .encode import effective_weights, encode
from .metrics import mac_error_stats, mean_std
from .quant import QuantizedMatrix, quantize
from .schemes import resolve
from .xbar import MacConfig, exact_matvec, matvec, program_matrix

ACT_BITS = 8
ACT_MAX = 2**ACT_BITS - 1


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray  # (n, dim) 8-bit activation codes
    labels: np.ndarray
    class_count: int
    generator_seed: int = None

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.int64)
        y = np.asarray(self.labels, dtype=np.int64)
        if f.ndim != 2 or y.shape != (f.shape[0],):
            raise ValueError("features must be (n, dim) with one label per row")
        if f.min() < 0 or f.max() > ACT_MAX:
            raise ValueError(f"features must be {ACT_BITS}-bit codes")
        if y.min() < 0 or y.max() >= self.class_count:
            raise ValueError(f"labels must lie in [0, {self.class_count})")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return len(self.labels)

    @property
    def feature_dim(self):
        return self.features.shape[1]

    @property
    def samples(self):
        return list(zip(self.features, self.labels))

    def split(self, n_first):
        return (
            Dataset(self.features[:n_first], self.labels[:n_first], self.class_count, self.generator_seed),
            Dataset(self.features[n_first:], self.labels[n_first:], self.class_count, self.generator_seed),
        )


def generate_dataset(classes, dim, n, seed, separation=6.0, spread=1.0):
    """Gaussian blobs whose closest centers sit ``separation * spread`` apart.

    Samples are assigned to classes round-robin, min-max scaled to [0, 1] and
    quantized to 8-bit codes.
    """
    if classes < 2 or dim < 2 or n < classes:
        raise ValueError("need classes >= 2, dim >= 2 and n >= classes")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(classes, dim))
    gaps = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
    min_gap = gaps[~np.eye(classes, dtype=bool)].min()
    centers *= separation * spread / min_gap
    labels = np.arange(n) % classes
    x = centers[labels] + rng.normal(scale=spread, size=(n, dim))
    lo, hi = x.min(), x.max()
    x = (x - lo) / (hi - lo) if hi > lo else np.zeros_like(x)
    codes = np.clip(round_half_away(x * ACT_MAX), 0, ACT_MAX).astype(np.int64)
    return Dataset(codes, labels, classes, seed)


@dataclass(frozen=True, eq=False)
class MlpLayer:
    weights: QuantizedMatrix
    bias: np.ndarray  # int64, in accumulator units (weight scale * input scale)
    requant: float = 1.0  # accumulator -> next-layer 8-bit code multiplier; unused on the last layer

    def to_dict(self):
        return {"weights": self.weights.to_dict(), "bias": self.bias.tolist(), "requant": self.requant}

    @classmethod
    def from_dict(cls, doc):
        return cls(QuantizedMatrix.from_dict(doc["weights"]), np.asarray(doc["bias"], dtype=np.int64),
                   float(doc["requant"]))


@dataclass(frozen=True, eq=False)
class MlpModel:
    layers: tuple
    input_dim: int
    class_count: int
    input_scale: float = 1.0 / ACT_MAX

    def __post_init__(self):
        dim = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.weights.rows != dim:
                raise ValueError(f"layer {i} expects {layer.weights.rows} inputs, got {dim}")
            if layer.bias.shape != (layer.weights.cols,):
                raise ValueError(f"layer {i} bias has the wrong length")
            dim = layer.weights.cols
        if dim != self.class_count:
            raise ValueError(f"last layer has {dim} outputs for {self.class_count} classes")

    def to_dict(self):
        return {
            "input_dim": self.input_dim,
            "class_count": self.class_count,
            "input_scale": self.input_scale,
            "layers": [layer.to_dict() for layer in self.layers],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(tuple(MlpLayer.from_dict(d) for d in doc["layers"]), int(doc["input_dim"]),
                   int(doc["class_count"]), float(doc["input_scale"]))


@dataclass(frozen=True, eq=False)
class FloatMlp:
    weights: list
    biases: list

    def forward(self, x, return_hidden=False):
        hidden = []
        h = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < len(self.weights) - 1:
                h = np.maximum(h, 0)
                hidden.append(h)
        return (h, hidden) if return_hidden else h

    def predict(self, x):
        return self.forward(x).argmax(axis=1)


def train_float(d, hidden_dims=(16,), epochs=50, seed=0, lr=0.1, batch_size=32):
    """Plain minibatch SGD on softmax cross-entropy with a fixed schedule.

    Training runs on mean-centered inputs; the centering is folded into the
    first-layer bias afterwards so the returned net takes raw [0, 1] inputs.
    """
    rng = np.random.default_rng(seed)
    dims = [d.feature_dim, *hidden_dims, d.class_count]
    weights = [rng.normal(scale=np.sqrt(2.0 / m), size=(m, n)) for m, n in zip(dims, dims[1:])]
    biases = [np.zeros(n) for n in dims[1:]]
    center = (d.features / ACT_MAX).mean(axis=0)
    x_all = d.features / ACT_MAX - center
    onehot = np.eye(d.class_count)[d.labels]
    net = FloatMlp(weights, biases)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            order = rng.permutation(len(d))
            for start in range(0, len(d), batch_size):
                idx = order[start:start + batch_size]
                x, y = x_all[idx], onehot[idx]
                logits, hidden = net.forward(x, return_hidden=True)
                logits = logits - logits.max(axis=1, keepdims=True)
                p = np.exp(logits)
                p /= p.sum(axis=1, keepdims=True)
                loss = -np.mean(np.sum(y * np.log(p + 1e-12), axis=1))
                if not np.isfinite(loss):
                    raise TrainingDivergedError("training loss became non-finite")
                grad = (p - y) / len(idx)
                inputs = [x, *hidden]
                for layer in reversed(range(len(weights))):
                    gw = inputs[layer].T @ grad
                    gb = grad.sum(axis=0)
                    if layer:
                        grad = (grad @ weights[layer].T) * (inputs[layer] > 0)
                    weights[layer] -= lr * gw
                    biases[layer] -= lr * gb
            if not all(np.isfinite(w).all() for w in weights):
                raise TrainingDivergedError("weights became non-finite")
    biases[0] = biases[0] - center @ weights[0]
    return FloatMlp(weights, biases)


def quantize_float(net, d, bit_width=8):
    """Per-layer symmetric weight quantization with static activation scales
    calibrated on ``d``."""
    x = d.features / ACT_MAX
    _, hidden = net.forward(x, return_hidden=True)
    act_scales = [1.0 / ACT_MAX]
    for h in hidden:
        peak = float(h.max())
        act_scales.append(peak / ACT_MAX if peak > 0 else 1.0)
    layers = []
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        q = quantize(w, bit_width=bit_width, signed=True)
        acc_scale = q.scale * act_scales[i]
        bias = round_half_away(b / acc_scale).astype(np.int64)
        requant = acc_scale / act_scales[i + 1] if i + 1 < len(act_scales) else 1.0
        layers.append(MlpLayer(q, bias, requant))
    return MlpModel(tuple(layers), d.feature_dim, d.class_count, act_scales[0])


def train_reference(d, hidden_dims=(16,), epochs=50, seed=0, lr=0.1, bit_width=8):
    return quantize_float(train_float(d, hidden_dims, epochs, seed, lr), d, bit_width)


def requantize(acc, multiplier):
    """ReLU, rescale and saturate an integer accumulator to 8-bit codes."""
    y = np.maximum(np.asarray(acc, dtype=np.int64), 0) * multiplier
    return np.clip(round_half_away(y), 0, ACT_MAX).astype(np.int64)


def forward(model, features, layer_matvec):
    """Integer forward pass; ``layer_matvec(i, activations)`` computes ``W_i^T a``."""
    a = np.asarray(features, dtype=np.int64)
    for i, layer in enumerate(model.layers):
        acc = layer_matvec(i, a) + layer.bias
        if i == len(model.layers) - 1:
            return acc
        a = requantize(acc, layer.requant)


def software_logits(model, features, encoding="conventional"):
    """Integer reference; the encoding only decides the stored clip floor."""
    ws = [effective_weights(layer.weights, encoding) for layer in model.layers]
    return forward(model, features, lambda i, a: exact_matvec(ws[i], a))


def accuracy(logits, labels):
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))


def program_model(model, stack, params, rng, analog_bias=False):
    stack = resolve(stack)
    out = []
    for layer in model.layers:
        enc = encode(layer.weights, stack.encoding, params.bits_per_cell)
        out.append(program_matrix(enc, params, stack.programming, rng, analog_bias=analog_bias))
    return out


def simulated_logits(model, features, programmed, mac, stats=None):
    return forward(model, features, lambda i, a: matvec(programmed[i], a, mac, stats=stats))


def trial_rng(master_seed, *key):
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class InferenceStats:
    mean: float
    std: float
    accuracies: tuple
    software_accuracy: float
    logit_rmse: tuple


def infer_sim(model, d, stack, params, naw=128, trials=1, master_seed=0, analog_bias=False):
    """Accuracy over ``trials`` independent programming draws."""
    if model.input_dim != d.feature_dim:
        raise ValueError(f"model expects {model.input_dim} features, dataset has {d.feature_dim}")
    stack = resolve(stack)
    mac = MacConfig(naw, stack.compensation, analog_bias)
    ref = software_logits(model, d.features, stack.encoding)
    accs, rmses = [], []
    for t in range(trials):
        programmed = program_model(model, stack, params, trial_rng(master_seed, t), analog_bias)
        logits = simulated_logits(model, d.features, programmed, mac)
        accs.append(accuracy(logits, d.labels))
        rmses.append(mac_error_stats(logits, ref).rmse)
    mean, std = mean_std(accs)
    return InferenceStats(mean, std, tuple(accs), accuracy(ref, d.labels), tuple(rmses))


def save_model(model, path):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path):
    with open(path) as fh:
        return MlpModel.from_dict(json.load(fh))


def save_dataset(d, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", *(f"f{i}" for i in range(d.feature_dim))])
        for x, y in zip(d.features, d.labels):
            w.writerow([int(y), *x.tolist()])


def load_dataset(path, class_count=None):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0].strip() == "label":
        rows = rows[1:]
    data = np.asarray([[int(v) for v in r] for r in rows if r], dtype=np.int64)
    labels, features = data[:, 0], data[:, 1:]
    return Dataset(features, labels, class_count or int(labels.max()) + 1)
