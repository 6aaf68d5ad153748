"""Feature autoencoder mapping 21 ELA features to a 2-D latent point.

Plain numpy with hand-written reverse-mode gradients. Encoder: five
affine+PReLU blocks and an affine+Tanh output (21-128-64-32-16-8-2); the
decoder mirrors it with a linear output layer. One learnable PReLU slope per
activation site.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .ela import ELAVector, N_FEATURES
from .errors import ParameterError, TrainingError

log = logging.getLogger(__name__)

ENCODER_WIDTHS = (N_FEATURES, 128, 64, 32, 16, 8, 2)
DECODER_WIDTHS = tuple(reversed(ENCODER_WIDTHS))
N_LAYERS = len(ENCODER_WIDTHS) - 1
PRELU_INIT = 0.25


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_decay_gamma: float = 0.9862327
    train_fraction: float = 0.8
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if min(self.epochs, self.batch_size) < 1 or self.learning_rate <= 0:
            raise ParameterError("epochs, batch_size and learning_rate must be positive")
        if not 0 < self.train_fraction < 1 or not 0 < self.lr_decay_gamma <= 1:
            raise ParameterError("train_fraction must be in (0,1) and gamma in (0,1]")


def learning_rate_at(epoch: int, config: TrainConfig) -> float:
    return config.learning_rate * config.lr_decay_gamma**epoch


@dataclass
class Normalizer:
    mins: np.ndarray
    maxs: np.ndarray

    @classmethod
    def fit(cls, data: np.ndarray) -> "Normalizer":
        mins, maxs = data.min(axis=0), data.max(axis=0)
        flat = ~(maxs > mins)
        if flat.any():
            # constant feature: give it a unit span so it maps to 0
            log.warning("constant features on the train split: %s", np.nonzero(flat)[0].tolist())
            maxs = np.where(flat, mins + 1.0, maxs)
        return cls(mins, maxs)

    def transform(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        return np.clip((data - self.mins) / (self.maxs - self.mins), 0.0, 1.0)

    def to_json(self):
        return {"mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_json(cls, d):
        return cls(np.array(d["mins"], dtype=float), np.array(d["maxs"], dtype=float))


def normalize(norm: Normalizer, e) -> np.ndarray:
    return norm.transform(e.values if isinstance(e, ELAVector) else e)


def _prelu(a, slope):
    return np.where(a > 0, a, slope * a)


@dataclass
class AEModel:
    weights: list
    biases: list
    slopes: np.ndarray
    normalizer: Normalizer | None = None
    train_meta: dict = field(default_factory=dict)
    trained: bool = False
    widths: tuple = ENCODER_WIDTHS

    @classmethod
    def initialize(cls, seed: int = 0, widths=ENCODER_WIDTHS) -> "AEModel":
        """Fresh model; `widths` is the encoder shape, the decoder mirrors it."""
        widths = tuple(int(w) for w in widths)
        if len(widths) < 3 or min(widths) < 1:
            raise ParameterError("need at least one hidden layer of positive width")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for shape in (widths, widths[::-1]):
            for fan_in, fan_out in zip(shape[:-1], shape[1:]):
                bound = 1.0 / np.sqrt(fan_in)
                weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
                biases.append(np.zeros(fan_out))
        slopes = np.full(2 * (len(widths) - 2), PRELU_INIT)
        return cls(weights, biases, slopes, widths=widths)

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    # parameter plumbing -------------------------------------------------

    def param_arrays(self):
        return self.weights + self.biases + [self.slopes]

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_arrays()])

    def set_flat_parameters(self, flat):
        flat = np.asarray(flat)
        arrays = self.param_arrays()
        if flat.size != sum(p.size for p in arrays):
            raise ParameterError("parameter vector has the wrong length")
        k = 0
        for p in arrays:
            p[...] = flat[k : k + p.size].reshape(p.shape)
            k += p.size

    @property
    def n_parameters(self) -> int:
        return sum(p.size for p in self.param_arrays())

    # forward ------------------------------------------------------------

    def _stack(self, x, offset, final_tanh, cache=None):
        h = x
        L = self.n_layers
        for i in range(L):
            W, b = self.weights[offset + i], self.biases[offset + i]
            a = h @ W + b
            if cache is not None:
                cache.append((h, a))
            if i < L - 1:
                h = _prelu(a, self.slopes[(offset // L) * (L - 1) + i])
            else:
                h = np.tanh(a) if final_tanh else a
        return h

    def encode_normalized(self, xn):
        return self._stack(np.atleast_2d(xn), 0, True)

    def encode(self, e) -> np.ndarray:
        """Latent point(s) in [-1, 1]^2 for raw feature vector(s)."""
        if self.normalizer is None:
            raise ParameterError("model has no fitted normalizer")
        single = isinstance(e, ELAVector) or np.ndim(e) == 1
        z = self.encode_normalized(normalize(self.normalizer, e))
        return z[0] if single else z

    def decode(self, h) -> np.ndarray:
        single = np.ndim(h) == 1
        out = self._stack(np.atleast_2d(np.asarray(h, dtype=float)), self.n_layers, False)
        return out[0] if single else out

    # training pieces -----------------------------------------------------

    def loss_and_grads(self, xn):
        """Mean per-sample reconstruction loss of normalized batch and its gradients."""
        L = self.n_layers
        enc_cache, dec_cache = [], []
        z = self._stack(xn, 0, True, enc_cache)
        out = self._stack(z, L, False, dec_cache)
        m = xn.shape[0]
        diff = out - xn
        loss = 0.5 * np.sum(diff * diff) / m

        gW = [None] * (2 * L)
        gb = [None] * (2 * L)
        gs = np.zeros_like(self.slopes)
        grad = diff / m
        for block, cache, final in ((1, dec_cache, None), (0, enc_cache, "tanh")):
            off = block * L
            for i in reversed(range(L)):
                h_in, a = cache[i]
                if i == L - 1:
                    if final == "tanh":
                        grad = grad * (1.0 - np.tanh(a) ** 2)
                else:
                    s_idx = block * (L - 1) + i
                    gs[s_idx] = np.sum(np.where(a > 0, 0.0, a) * grad)
                    grad = grad * np.where(a > 0, 1.0, self.slopes[s_idx])
                gW[off + i] = h_in.T @ grad
                gb[off + i] = grad.sum(axis=0)
                grad = grad @ self.weights[off + i].T
        return loss, gW + gb + [gs]

    def batch_loss(self, xn) -> float:
        return float(self.raw_loss(xn))

    def raw_loss(self, xn):
        """Same as batch_loss but keeps the parameter dtype (used by gradient checks)."""
        out = self._stack(self._stack(xn, 0, True), self.n_layers, False)
        return 0.5 * np.sum((out - xn) ** 2) / xn.shape[0]

    def pre_activations(self, xn):
        cache_e, cache_d = [], []
        self._stack(self._stack(xn, 0, True, cache_e), self.n_layers, False, cache_d)
        return [a for _, a in cache_e + cache_d]

    # persistence ----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "architecture": {
                "encoder": list(self.widths),
                "decoder": list(self.widths[::-1]),
                "activation": "prelu",
                "latent_activation": "tanh",
            },
            "parameters": self.flat_parameters().tolist(),
            "normalizer": None if self.normalizer is None else self.normalizer.to_json(),
            "train_meta": self.train_meta,
            "trained": self.trained,
        }

    @classmethod
    def from_json(cls, d) -> "AEModel":
        arch = d.get("architecture", {})
        enc = arch.get("encoder")
        if not enc or arch.get("decoder") != enc[::-1] or enc[0] != N_FEATURES or enc[-1] != 2:
            raise ParameterError("model file architecture does not match")
        model = cls.initialize(0, enc)
        model.set_flat_parameters(d["parameters"])
        if d.get("normalizer") is not None:
            model.normalizer = Normalizer.from_json(d["normalizer"])
        model.train_meta = d.get("train_meta", {})
        model.trained = bool(d.get("trained", False))
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "AEModel":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def fingerprint(self) -> str:
        payload = json.dumps(
            {"p": self.flat_parameters().tolist(), "n": self.to_json()["normalizer"]},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def encode(model: AEModel, e) -> np.ndarray:
    return model.encode(e)


def decode(model: AEModel, h) -> np.ndarray:
    return model.decode(h)


def reconstruction_loss(e_norm, e_rec) -> float:
    a, b = np.asarray(e_norm, dtype=float), np.asarray(e_rec, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"length mismatch {a.shape} vs {b.shape}")
    d = a - b
    return 0.5 * float(d @ d)


@dataclass
class TrainResult:
    model: AEModel
    train_loss: list
    val_loss: list


def _as_matrix(dataset):
    rows = []
    for k, e in enumerate(dataset):
        if isinstance(e, ELAVector):
            if not e.valid:
                raise TrainingError(f"dataset entry {k} is an invalid ELA vector")
            e = e.values
        rows.append(np.asarray(e, dtype=float))
    data = np.array(rows, dtype=float).reshape(-1, N_FEATURES)
    bad = np.nonzero(~np.all(np.isfinite(data), axis=1))[0]
    if bad.size:
        raise TrainingError(f"non-finite feature rows: {bad.tolist()}")
    return data


def train(dataset, config: TrainConfig = TrainConfig(), progress=None, normalizer=None) -> TrainResult:
    """Adam on the reconstruction loss; ``normalizer`` skips fitting one on the train split."""
    data = _as_matrix(dataset)
    if len(data) < 10 * config.batch_size:
        raise TrainingError(f"need at least {10 * config.batch_size} vectors, got {len(data)}")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(len(data))
    n_train = int(round(config.train_fraction * len(data)))
    train_raw, val_raw = data[perm[:n_train]], data[perm[n_train:]]

    model = AEModel.initialize(int(rng.integers(2**63)))
    model.normalizer = normalizer if normalizer is not None else Normalizer.fit(train_raw)
    xt = model.normalizer.transform(train_raw)
    xv = model.normalizer.transform(val_raw)

    params = model.param_arrays()
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    step = 0
    train_curve, val_curve = [], []
    b1, b2 = config.beta1, config.beta2
    for epoch in range(config.epochs):
        lr = learning_rate_at(epoch, config)
        order = rng.permutation(n_train)
        for lo in range(0, n_train, config.batch_size):
            _, grads = model.loss_and_grads(xt[order[lo : lo + config.batch_size]])
            step += 1
            c1, c2 = 1.0 - b1**step, 1.0 - b2**step
            for p, g, u, v in zip(params, grads, m1, m2):
                u *= b1
                u += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                p -= lr * (u / c1) / (np.sqrt(v / c2) + config.adam_eps)
        train_curve.append(model.batch_loss(xt))
        val_curve.append(model.batch_loss(xv) if len(xv) else float("nan"))
        if not (np.isfinite(train_curve[-1]) and np.isfinite(val_curve[-1])):
            raise TrainingError(f"loss diverged at epoch {epoch}")
        if progress:
            progress(epoch, train_curve[-1], val_curve[-1])
    model.trained = True
    model.train_meta = {
        "seed": config.seed,
        "epochs": config.epochs,
        "final_losses": {"train": train_curve[-1], "val": val_curve[-1]},
        "n_train": n_train,
        "n_val": len(data) - n_train,
    }
    return TrainResult(model, train_curve, val_curve)
