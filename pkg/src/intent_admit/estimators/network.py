"""Minimal dense/conv/LSTM network kernel with handwritten backprop.

Only what the intent models need: 1-D convolution, LSTM, dense, ReLU,
stride-2 subsampling and flatten, with softmax cross-entropy and MSE losses,
L1/L2 weight penalties, SGD/Adam updates, exponential LR decay and
early stopping on a validation split.  Everything is float64 numpy; a fixed
seed makes training fully reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as _sigmoid

from ..errors import FitFailure


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class Layer:
    """Forward/backward pair; params() yields (array, grad, is_weight) triples."""

    def params(self):
        return []

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        limit = math.sqrt(6.0 / (n_in + n_out))
        self.w = rng.uniform(-limit, limit, size=(n_in, n_out))
        self.b = np.zeros(n_out)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def params(self):
        return [(self.w, self.dw, True), (self.b, self.db, False)]

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.dw[...] = self._x.T @ dy
        self.db[...] = dy.sum(axis=0)
        return dy @ self.w.T


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class Flatten(Layer):
    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._shape)


class Subsample(Layer):
    """Keep every ``stride``-th timestep of a (batch, T, C) tensor."""

    def __init__(self, stride: int = 2):
        self.stride = stride

    def forward(self, x):
        self._shape = x.shape
        return x[:, ::self.stride, :]

    def backward(self, dy):
        dx = np.zeros(self._shape)
        dx[:, ::self.stride, :] = dy
        return dx


class Conv1D(Layer):
    """Valid 1-D convolution over (batch, T, C) -> (batch, T - width + 1, filters)."""

    def __init__(self, c_in: int, filters: int, width: int, rng: np.random.Generator):
        fan_in = width * c_in
        limit = math.sqrt(6.0 / (fan_in + filters))
        self.w = rng.uniform(-limit, limit, size=(fan_in, filters))
        self.b = np.zeros(filters)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self.width = width
        self.c_in = c_in

    def params(self):
        return [(self.w, self.dw, True), (self.b, self.db, False)]

    def _im2col(self, x):
        t_out = x.shape[1] - self.width + 1
        cols = np.stack([x[:, k:k + t_out, :] for k in range(self.width)], axis=2)
        return cols.reshape(x.shape[0], t_out, self.width * self.c_in)

    def forward(self, x):
        if x.shape[1] < self.width:
            raise FitFailure(f"conv input length {x.shape[1]} < kernel width {self.width}")
        self._x_shape = x.shape
        self._cols = self._im2col(x)
        return self._cols @ self.w + self.b

    def backward(self, dy):
        b, t_out, _ = dy.shape
        cols2 = self._cols.reshape(-1, self.w.shape[0])
        self.dw[...] = cols2.T @ dy.reshape(-1, dy.shape[2])
        self.db[...] = dy.sum(axis=(0, 1))
        dcols = (dy @ self.w.T).reshape(b, t_out, self.width, self.c_in)
        dx = np.zeros(self._x_shape)
        for k in range(self.width):
            dx[:, k:k + t_out, :] += dcols[:, :, k, :]
        return dx


class LSTM(Layer):
    """Single LSTM layer over (batch, T, C); returns the last hidden state."""

    def __init__(self, c_in: int, hidden: int, rng: np.random.Generator):
        h = hidden
        limit = math.sqrt(6.0 / (c_in + 4 * h))
        self.wx = rng.uniform(-limit, limit, size=(c_in, 4 * h))
        limit = math.sqrt(6.0 / (h + 4 * h))
        self.wh = rng.uniform(-limit, limit, size=(h, 4 * h))
        self.b = np.zeros(4 * h)
        self.b[h:2 * h] = 1.0  # forget-gate bias
        self.dwx = np.zeros_like(self.wx)
        self.dwh = np.zeros_like(self.wh)
        self.db = np.zeros_like(self.b)
        self.hidden = h

    def params(self):
        return [(self.wx, self.dwx, True), (self.wh, self.dwh, True),
                (self.b, self.db, False)]

    def forward(self, x):
        b, t, _ = x.shape
        h = self.hidden
        self._x = x
        # project all inputs in one call; only the recurrence stays sequential.
        # scratch arrays are time-major so per-step slices are contiguous.
        xw = (x.reshape(b * t, -1) @ self.wx).reshape(b, t, 4 * h)
        gates = np.empty((t, b, 4 * h))
        h_all = np.empty((t, b, h))      # h_{k-1} per step
        c_all = np.empty((t, b, h))      # c_{k-1} per step
        tanh_c_all = np.empty((t, b, h))
        h_t = np.zeros((b, h))
        c_t = np.zeros((b, h))
        for k in range(t):
            h_all[k] = h_t
            c_all[k] = c_t
            z = gates[k]
            np.add(xw[:, k], h_t @ self.wh, out=z)
            z += self.b
            z[:, :2 * h] = _sigmoid(z[:, :2 * h])
            np.tanh(z[:, 2 * h:3 * h], out=z[:, 2 * h:3 * h])
            z[:, 3 * h:] = _sigmoid(z[:, 3 * h:])
            c_t = z[:, h:2 * h] * c_t + z[:, :h] * z[:, 2 * h:3 * h]
            tanh_c = np.tanh(c_t)
            tanh_c_all[k] = tanh_c
            h_t = z[:, 3 * h:] * tanh_c
        self._gates = gates
        self._h_all = h_all
        self._c_all = c_all
        self._tanh_c_all = tanh_c_all
        return h_t

    def backward(self, dy):
        x = self._x
        b, t, c_in = x.shape
        h = self.hidden
        gates = self._gates
        dz_all = np.empty((t, b, 4 * h))
        dh = dy
        dc = np.zeros((b, h))
        for k in range(t - 1, -1, -1):
            z = gates[k]
            i = z[:, :h]
            f = z[:, h:2 * h]
            g = z[:, 2 * h:3 * h]
            o = z[:, 3 * h:]
            tanh_c = self._tanh_c_all[k]
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c ** 2)
            dz = dz_all[k]
            dz[:, :h] = (dc * g) * i * (1.0 - i)
            dz[:, h:2 * h] = (dc * self._c_all[k]) * f * (1.0 - f)
            dz[:, 2 * h:3 * h] = (dc * i) * (1.0 - g ** 2)
            dz[:, 3 * h:] = do * o * (1.0 - o)
            dh = dz @ self.wh.T
            dc = dc * f
        dz2 = dz_all.transpose(1, 0, 2).reshape(b * t, 4 * h)
        self.dwx[...] = x.reshape(b * t, c_in).T @ dz2
        self.dwh[...] = self._h_all.transpose(1, 0, 2).reshape(b * t, h).T @ dz2
        self.db[...] = dz2.sum(axis=0)
        return (dz2 @ self.wx.T).reshape(b, t, c_in)


class Network:
    """Layer stack plus loss; exposes flat parameter/gradient access."""

    def __init__(self, layers: list[Layer], loss: str, l1: float = 0.0, l2: float = 0.0):
        if loss not in ("softmax_ce", "mse"):
            raise ValueError(f"unknown loss {loss!r}")
        self.layers = layers
        self.loss_kind = loss
        self.l1 = l1
        self.l2 = l2

    def forward(self, x: np.ndarray) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def data_loss(self, out: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        n = out.shape[0]
        if self.loss_kind == "softmax_ce":
            p = softmax(out)
            yi = y.astype(int)
            eps = 1e-12
            loss = -float(np.mean(np.log(p[np.arange(n), yi] + eps)))
            dout = p.copy()
            dout[np.arange(n), yi] -= 1.0
            dout /= n
        else:
            pred = out.reshape(n)
            err = pred - y.reshape(n)
            loss = float(np.mean(err ** 2))
            dout = (2.0 * err / n).reshape(out.shape)
        return loss, dout

    def reg_loss(self) -> float:
        total = 0.0
        if self.l1 == 0.0 and self.l2 == 0.0:
            return total
        for layer in self.layers:
            for p, _, is_weight in layer.params():
                if is_weight:
                    total += self.l1 * float(np.abs(p).sum()) + self.l2 * float((p ** 2).sum())
        return total

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        data, _ = self.data_loss(self.forward(x), y)
        return data + self.reg_loss()

    def backward(self, dout: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        if self.l1 != 0.0 or self.l2 != 0.0:
            for layer in self.layers:
                for p, g, is_weight in layer.params():
                    if is_weight:
                        g += self.l1 * np.sign(p) + 2.0 * self.l2 * p
        return dout

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p, _, _ in layer.params()]

    def gradients(self) -> list[np.ndarray]:
        return [g for layer in self.layers for _, g, _ in layer.params()]

    def snapshot(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def restore(self, snap: list[np.ndarray]) -> None:
        for p, s in zip(self.parameters(), snap):
            p[...] = s

    def predict(self, x: np.ndarray, chunk: int = 512) -> np.ndarray:
        outs = [self.forward(x[i:i + chunk]) for i in range(0, x.shape[0], chunk)]
        return np.concatenate(outs, axis=0)


def numeric_gradient(net: Network, x: np.ndarray, y: np.ndarray,
                     eps: float = 1e-6) -> list[np.ndarray]:
    """Central finite differences of the total loss wrt every parameter."""
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + eps
            hi = net.loss(x, y)
            p[idx] = orig - eps
            lo = net.loss(x, y)
            p[idx] = orig
            g[idx] = (hi - lo) / (2.0 * eps)
            it.iternext()
        grads.append(g)
    return grads


def analytic_gradient(net: Network, x: np.ndarray, y: np.ndarray) -> list[np.ndarray]:
    out = net.forward(x)
    _, dout = net.data_loss(out, y)
    net.backward(dout)
    return [g.copy() for g in net.gradients()]


def max_relative_error(analytic: list[np.ndarray], numeric: list[np.ndarray]) -> float:
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    batch_size: int = 128
    learning_rate: float = 1e-4
    lr_decay: float = 0.95
    epochs: int = 40
    val_fraction: float = 0.05
    patience: int = 10
    l1: float = 0.0
    l2: float = 0.0
    optimizer: str = "sgd"  # "sgd" | "adam"
    seed: int = 0


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopped_epoch: int = -1


class _Adam:
    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params, grads, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1 ** self.t
        corr2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)


def train_network(net: Network, x: np.ndarray, y: np.ndarray,
                  cfg: TrainConfig) -> TrainHistory:
    """Minibatch training with per-epoch LR decay and early stopping.

    Validation loss (data term only) is monitored; the best-validation
    weights are restored at the end.  A non-finite loss aborts with
    diagnostics rather than silently producing garbage.
    """
    net.l1 = cfg.l1
    net.l2 = cfg.l2
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7261]))
    n = x.shape[0]
    order = rng.permutation(n)
    n_val = int(round(cfg.val_fraction * n))
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_val, y_val = x[val_idx], y[val_idx]
    x_tr, y_tr = x[train_idx], y[train_idx]
    n_tr = x_tr.shape[0]
    if n_tr == 0:
        raise FitFailure("no training samples after validation split")

    history = TrainHistory()
    params = net.parameters()
    adam = _Adam(params) if cfg.optimizer == "adam" else None
    best_val = math.inf
    best_snap = net.snapshot()
    since_best = 0

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * (cfg.lr_decay ** epoch)
        perm = rng.permutation(n_tr)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n_tr, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = x_tr[idx], y_tr[idx]
            out = net.forward(xb)
            data, dout = net.data_loss(out, yb)
            total = data + net.reg_loss()
            if not math.isfinite(total):
                raise FitFailure(
                    f"non-finite loss {total} at epoch {epoch} batch {n_batches}; "
                    f"lr={lr:.3g} batch_size={len(idx)}")
            net.backward(dout)
            grads = net.gradients()
            if adam is not None:
                adam.step(params, grads, lr)
            else:
                for p, g in zip(params, grads):
                    p -= lr * g
            epoch_loss += total
            n_batches += 1
        history.train_loss.append(epoch_loss / max(n_batches, 1))

        if n_val:
            out = net.predict(x_val)
            val, _ = net.data_loss(out, y_val)
        else:
            val = history.train_loss[-1]
        history.val_loss.append(val)
        if val < best_val - 1e-12:
            best_val = val
            best_snap = net.snapshot()
            history.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                history.stopped_epoch = epoch
                break

    net.restore(best_snap)
    if history.stopped_epoch < 0:
        history.stopped_epoch = len(history.train_loss) - 1
    return history
