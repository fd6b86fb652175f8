"""Feed-forward networks trained by mini-batch gradient descent.

One network class serves three jobs: the binary classifier, the target
generator, and the reconstruction network inside the autoencoder imputer.
Hidden layers are ReLU; the output head is either a single sigmoid unit
trained with binary cross entropy or a linear layer trained with squared
error restricted to a cell mask. Dropout (inverted scaling, so inference
needs no rescaling) is applied to the last hidden layer only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ._rng import rng_for
from .data import Dataset, validate_matrix

CHECKPOINT_VERSION = 1


@dataclass
class MlpSpec:
    hidden_layers: list[int] = field(default_factory=lambda: [20, 20])
    dropout_rate: float = 0.2
    activation: str = "relu"
    output: str = "sigmoid-binary"

    def __post_init__(self):
        if any(w <= 0 for w in self.hidden_layers):
            raise ValueError("hidden layer widths must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if self.activation != "relu":
            raise ValueError("only relu hidden activations are supported")
        if self.output not in ("sigmoid-binary", "linear"):
            raise ValueError("output must be 'sigmoid-binary' or 'linear'")


@dataclass
class TrainConfig:
    max_epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 0.01
    patience: int = 20
    checkpoint_best: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce_with_logits(z: np.ndarray, y: np.ndarray) -> float:
    # max(z,0) - y*z + log(1 + exp(-|z|)) is the stable per-sample form.
    per = np.maximum(z, 0.0) - y * z + np.log1p(np.exp(-np.abs(z)))
    return float(per.mean())


class FeedForward:
    """Weights, forward pass, and analytic gradients for one network."""

    def __init__(self, layer_sizes: list[int], output: str = "sigmoid-binary",
                 dropout_rate: float = 0.0, seed: int = 0):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.output = output
        self.dropout_rate = float(dropout_rate)
        rng = rng_for(seed, "init")
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def _forward(self, x: np.ndarray, train: bool,
                 rng: np.random.Generator | None):
        """Activations per layer; dropout mask on the last hidden layer when training."""
        acts = [x]
        drop_mask = None
        for layer in range(self.n_layers):
            z = acts[-1] @ self.weights[layer] + self.biases[layer]
            last = layer == self.n_layers - 1
            if last:
                acts.append(z)          # output head stays pre-activation here
                continue
            a = np.maximum(z, 0.0)
            if train and self.dropout_rate > 0.0 and layer == self.n_layers - 2:
                keep = 1.0 - self.dropout_rate
                drop_mask = (rng.random(a.shape) < keep) / keep
                a = a * drop_mask
            acts.append(a)
        return acts, drop_mask

    def logits(self, x: np.ndarray, train: bool = False,
               rng: np.random.Generator | None = None) -> np.ndarray:
        acts, _ = self._forward(np.asarray(x, dtype=np.float64), train, rng)
        return acts[-1]

    def loss(self, x: np.ndarray, y: np.ndarray,
             loss_mask: np.ndarray | None = None) -> float:
        z = self.logits(x)
        if self.output == "sigmoid-binary":
            return _bce_with_logits(z.ravel(), np.asarray(y, dtype=np.float64))
        diff = z - y
        if loss_mask is None:
            return float(np.mean(diff * diff))
        w = np.asarray(loss_mask, dtype=np.float64)
        total = w.sum()
        if total == 0:
            raise ValueError("loss mask selects no cells")
        return float(np.sum(w * diff * diff) / total)

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray,
                       loss_mask: np.ndarray | None = None,
                       train: bool = False,
                       rng: np.random.Generator | None = None):
        """Loss plus dL/dW, dL/db for every layer (backpropagation)."""
        x = np.asarray(x, dtype=np.float64)
        acts, drop_mask = self._forward(x, train, rng)
        z = acts[-1]
        if self.output == "sigmoid-binary":
            y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
            loss = _bce_with_logits(z.ravel(), y.ravel())
            delta = (_sigmoid(z) - y) / z.shape[0]
        else:
            diff = z - y
            if loss_mask is None:
                loss = float(np.mean(diff * diff))
                delta = 2.0 * diff / diff.size
            else:
                w = np.asarray(loss_mask, dtype=np.float64)
                total = w.sum()
                if total == 0:
                    raise ValueError("loss mask selects no cells")
                loss = float(np.sum(w * diff * diff) / total)
                delta = 2.0 * w * diff / total

        grads_w = [np.empty(0)] * self.n_layers
        grads_b = [np.empty(0)] * self.n_layers
        for layer in range(self.n_layers - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer == 0:
                break
            delta = delta @ self.weights[layer].T
            if drop_mask is not None and layer - 1 == self.n_layers - 2:
                delta = delta * drop_mask
            delta = delta * (acts[layer] > 0.0)
        return loss, grads_w, grads_b

    def apply_grads(self, grads_w, grads_b, lr: float) -> None:
        for layer in range(self.n_layers):
            self.weights[layer] -= lr * grads_w[layer]
            self.biases[layer] -= lr * grads_b[layer]

    def snapshot(self) -> list[np.ndarray]:
        return [w.copy() for w in self.weights] + [b.copy() for b in self.biases]

    def restore(self, snap: list[np.ndarray]) -> None:
        n = self.n_layers
        self.weights = [w.copy() for w in snap[:n]]
        self.biases = [b.copy() for b in snap[n:]]


def gradient_check(net: FeedForward, x: np.ndarray, y: np.ndarray,
                   loss_mask: np.ndarray | None = None,
                   eps: float = 1e-5) -> float:
    """Max relative error of analytic gradients vs central finite differences.

    Dropout is off (deterministic loss); tiny gradients are guarded so the
    ratio stays meaningful.
    """
    _, grads_w, grads_b = net.loss_and_grads(x, y, loss_mask)
    worst = 0.0
    params = list(net.weights) + list(net.biases)
    grads = list(grads_w) + list(grads_b)
    for p, g in zip(params, grads):
        flat_p = p.ravel()
        flat_g = g.ravel()
        for i in range(flat_p.size):
            keep = flat_p[i]
            flat_p[i] = keep + eps
            up = net.loss(x, y, loss_mask)
            flat_p[i] = keep - eps
            down = net.loss(x, y, loss_mask)
            flat_p[i] = keep
            numeric = (up - down) / (2.0 * eps)
            denom = max(abs(numeric) + abs(flat_g[i]), 1e-8)
            worst = max(worst, abs(numeric - flat_g[i]) / denom)
    return worst


@dataclass
class MlpModel:
    spec: MlpSpec
    net: FeedForward
    # One row per epoch: (train_loss, valid_loss, train_acc, valid_acc).
    training_history: list[tuple] = field(default_factory=list)
    best_epoch: int = 0
    best_valid_loss: float = np.inf


def _accuracy(net: FeedForward, x: np.ndarray, y: np.ndarray) -> float:
    probs = _sigmoid(net.logits(x).ravel())
    return float(np.mean((probs >= 0.5).astype(np.float64) == y))


def train_mlp(train: Dataset, valid: Dataset, spec: MlpSpec | None = None,
              cfg: TrainConfig | None = None) -> MlpModel:
    """Binary classifier trained with early stopping on validation loss.

    Stops once validation loss has failed to improve for `patience`
    consecutive epochs; with checkpoint_best the returned weights are those
    of the best validation epoch.
    """
    spec = spec or MlpSpec()
    cfg = cfg or TrainConfig()
    if train.rows == 0:
        raise ValueError("training set is empty")
    if train.target is None or valid.target is None:
        raise ValueError("train and valid need targets")
    if train.mask.any() or valid.mask.any():
        raise ValueError("training requires fully observed data")
    if train.cols != valid.cols:
        raise ValueError("train/valid column counts differ")

    sizes = [train.cols] + list(spec.hidden_layers) + [1]
    net = FeedForward(sizes, output="sigmoid-binary",
                      dropout_rate=spec.dropout_rate, seed=cfg.seed)
    x, y = train.features, train.target
    xv, yv = valid.features, valid.target
    shuffle_rng = rng_for(cfg.seed, "shuffle")
    dropout_rng = rng_for(cfg.seed, "dropout")

    model = MlpModel(spec=spec, net=net)
    best_snap = net.snapshot()
    since_best = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, gw, gb = net.loss_and_grads(x[idx], y[idx], train=True,
                                           rng=dropout_rng)
            net.apply_grads(gw, gb, cfg.learning_rate)
        train_loss = net.loss(x, y)
        valid_loss = net.loss(xv, yv)
        model.training_history.append(
            (train_loss, valid_loss, _accuracy(net, x, y), _accuracy(net, xv, yv)))
        if valid_loss < model.best_valid_loss:
            model.best_valid_loss = valid_loss
            model.best_epoch = epoch
            best_snap = net.snapshot()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    if cfg.checkpoint_best:
        net.restore(best_snap)
    return model


def predict_mlp(model: MlpModel, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(probabilities, labels); label 1 wherever probability >= 0.5."""
    x = validate_matrix(data)
    if np.isnan(x).any():
        raise ValueError("prediction requires fully observed data")
    if x.shape[1] != model.net.layer_sizes[0]:
        raise ValueError(
            f"data has {x.shape[1]} columns, model expects {model.net.layer_sizes[0]}")
    probs = _sigmoid(model.net.logits(x).ravel())
    return probs, (probs >= 0.5).astype(np.int64)


def save_checkpoint(path, net: FeedForward) -> None:
    """Versioned .npz with the architecture header and all weights."""
    payload = {
        "version": np.array([CHECKPOINT_VERSION]),
        "layer_sizes": np.array(net.layer_sizes),
        "output": np.array([net.output]),
        "dropout_rate": np.array([net.dropout_rate]),
    }
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        payload[f"w{i}"] = w
        payload[f"b{i}"] = b
    np.savez(path, **payload)


def load_checkpoint(path) -> FeedForward:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"][0])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = [int(s) for s in data["layer_sizes"]]
        net = FeedForward(sizes, output=str(data["output"][0]),
                          dropout_rate=float(data["dropout_rate"][0]))
        net.weights = [data[f"w{i}"].astype(np.float64) for i in range(len(sizes) - 1)]
        net.biases = [data[f"b{i}"].astype(np.float64) for i in range(len(sizes) - 1)]
    return net


def save_history_csv(path, history: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "valid_loss", "train_acc", "valid_acc"])
        for epoch, row in enumerate(history, start=1):
            writer.writerow([epoch] + [repr(float(v)) for v in row])
