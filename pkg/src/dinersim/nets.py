"""Minimal dense-network kernel: forward/backward, losses, optimizers.

Everything is plain numpy. Weights initialize uniform in
+-sqrt(6/(fan_in+fan_out)) from a seeded ``numpy.random.Generator`` (PCG64);
dropout is inverted (mask drawn as ``rng.random(shape) >= rate``, surviving
units scaled by 1/(1-rate)) and only active in train mode, so evaluation is a
pure function. Gradients are exact reverse-mode; ``finite_difference`` gives
the independent check used throughout the tests.

Checkpoints are canonical JSON (sorted keys, shortest-round-trip floats), so
save -> load -> save is byte-stable.
"""

import json
from dataclasses import dataclass, field

import numpy as np


class NetError(ValueError):
    pass


class OptimizerError(RuntimeError):
    pass


def relu(z):
    return np.maximum(z, 0.0)


ACTIVATIONS = ("relu", "identity")


class DenseNet:
    """Fully connected net: affine -> activation (-> dropout) per layer."""

    def __init__(self, widths, activations=None, dropout=None, seed: int = 0):
        if len(widths) < 2:
            raise NetError("need at least input and output widths")
        n_layers = len(widths) - 1
        if activations is None:
            activations = ["relu"] * (n_layers - 1) + ["identity"]
        if len(activations) != n_layers:
            raise NetError("one activation per layer required")
        for a in activations:
            if a not in ACTIVATIONS:
                raise NetError(f"unknown activation '{a}'")
        if dropout is None:
            dropout = [0.0] * (n_layers - 1)
        if len(dropout) != n_layers - 1:
            raise NetError("one dropout rate per layer boundary required")
        for r in dropout:
            if not 0.0 <= r < 1.0:
                raise NetError("dropout rate must be in [0, 1)")
        self.widths = list(int(w) for w in widths)
        self.activations = list(activations)
        self.dropout = list(float(r) for r in dropout)
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.weights = []
        self.biases = []
        for i in range(n_layers):
            fan_in, fan_out = self.widths[i], self.widths[i + 1]
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            self.weights.append(self.rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self):
        return len(self.weights)

    def params(self) -> dict:
        out = {}
        for i in range(self.n_layers):
            out[f"W{i}"] = self.weights[i]
            out[f"b{i}"] = self.biases[i]
        return out

    def set_params(self, params: dict) -> None:
        for i in range(self.n_layers):
            self.weights[i] = np.asarray(params[f"W{i}"], dtype=np.float64)
            self.biases[i] = np.asarray(params[f"b{i}"], dtype=np.float64)

    def forward(self, x, train: bool = False):
        """Returns (output, cache). Accepts a single vector or a batch."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.widths[0]:
            raise NetError(f"input width {x.shape[1]} != expected {self.widths[0]}")
        caches = []
        h = x
        for i in range(self.n_layers):
            z = h @ self.weights[i] + self.biases[i]
            a = relu(z) if self.activations[i] == "relu" else z
            mask = None
            if train and i < self.n_layers - 1 and self.dropout[i] > 0.0:
                rate = self.dropout[i]
                mask = (self.rng.random(a.shape) >= rate) / (1.0 - rate)
                a = a * mask
            caches.append((h, z, mask))
            h = a
        out = h[0] if single else h
        return out, caches

    def backward(self, caches, dout):
        """Exact gradients of a scalar loss given d(loss)/d(output)."""
        dout = np.asarray(dout, dtype=np.float64)
        single = dout.ndim == 1
        if single:
            dout = dout[None, :]
        grads = {}
        dh = dout
        for i in reversed(range(self.n_layers)):
            h_in, z, mask = caches[i]
            if mask is not None:
                dh = dh * mask
            if self.activations[i] == "relu":
                dz = dh * (z > 0)
            else:
                dz = dh
            grads[f"W{i}"] = h_in.T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            dh = dz @ self.weights[i].T
        dx = dh[0] if single else dh
        return grads, dx

    def copy(self) -> "DenseNet":
        other = DenseNet(self.widths, self.activations, self.dropout, self.seed)
        other.set_params({k: v.copy() for k, v in self.params().items()})
        return other

    def meta(self) -> dict:
        return {
            "widths": self.widths,
            "activations": self.activations,
            "dropout": self.dropout,
            "seed": self.seed,
        }

    @classmethod
    def from_meta(cls, meta: dict, arrays: dict) -> "DenseNet":
        net = cls(meta["widths"], meta["activations"], meta["dropout"],
                  meta.get("seed", 0))
        net.set_params(arrays)
        return net


# ------------------------------------------------------------------- losses

def softmax(logits):
    logits = np.asarray(logits, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, label: int):
    """Single-sample cross entropy: (loss, d loss / d logits)."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= label < logits.shape[-1]:
        raise NetError(f"label out of range: {label}")
    z = logits - logits.max()
    logsumexp = np.log(np.exp(z).sum())
    loss = logsumexp - z[label]
    grad = softmax(logits)
    grad[label] -= 1.0
    return float(loss), grad


def softmax_cross_entropy_batch(logits, labels):
    """Mean cross entropy over a batch: (loss, d loss / d logits)."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsumexp - z[np.arange(n), labels]))
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


# --------------------------------------------------------------- optimizers

@dataclass
class Sgd:
    lr: float = 0.01
    steps: int = 0

    def step(self, params: dict, grads: dict) -> None:
        _check_finite(grads)
        for name, g in grads.items():
            params[name] -= self.lr * g
        self.steps += 1


@dataclass
class Adam:
    """Adaptive-moment update: m,v exponential averages with bias correction."""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    steps: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict, grads: dict) -> None:
        _check_finite(grads)
        self.steps += 1
        t = self.steps
        for name, g in grads.items():
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            mhat = m / (1 - self.beta1 ** t)
            vhat = v / (1 - self.beta2 ** t)
            params[name] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _check_finite(grads: dict) -> None:
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for parameter '{name}'")


# ------------------------------------------------------- gradient checking

def finite_difference(f, x, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f at x, per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * h)
    return grad


def gradient_error(analytic, numeric) -> float:
    """Scale-normalized max deviation: max|a-n| / max(1, |a|_inf, |n|_inf)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    scale = max(1.0, float(np.abs(a).max(initial=0.0)),
                float(np.abs(n).max(initial=0.0)))
    return float(np.abs(a - n).max(initial=0.0)) / scale


# ------------------------------------------------------------- checkpoints

def save_checkpoint(path, kind: str, arrays: dict, meta: dict) -> None:
    payload = {
        "kind": kind,
        "meta": meta,
        "arrays": {
            name: {"shape": list(np.asarray(a).shape),
                   "data": np.asarray(a, dtype=np.float64).reshape(-1).tolist()}
            for name, a in arrays.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    arrays = {
        name: np.asarray(spec["data"], dtype=np.float64).reshape(spec["shape"])
        for name, spec in payload["arrays"].items()
    }
    return payload["kind"], arrays, payload["meta"]
