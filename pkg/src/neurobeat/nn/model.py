"""FCN and two-layer GRU onset predictors with hand-written backpropagation.

Parameters live in one flat float64 vector; named arrays are reshaped views
into it, in checkpoint order:

* FCN: ``W1, b1, W2, b2`` (row-major).
* GRU: per layer ``Wz, Wr, Wn, Uz, Ur, Un, bz, br, bn, cz, cr, cn``, then the
  per-timestep head ``Wo, bo``.

Inputs are batches of windows shaped ``(batch, channels, T)``; outputs are
``(batch, T)`` logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from ..errors import LengthMismatch, ShapeError
from ..rng import make_rng

FCN = "fcn"
GRU = "gru"
ARCHS = (FCN, GRU)
_GATES = ("z", "r", "n")


@dataclass(frozen=True)
class ArchSpec:
    arch: str
    channels: int = 125
    window_len: int = 125
    hidden: int | None = None
    layers: int = 2

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.hidden is None:
            object.__setattr__(self, "hidden", 256 if self.arch == FCN else 64)
        if self.arch == FCN and self.layers != 2:
            raise ValueError("the FCN always has two layers")

    def layout(self) -> list[tuple[str, tuple[int, ...]]]:
        C, T, H = self.channels, self.window_len, self.hidden
        if self.arch == FCN:
            return [("W1", (H, C * T)), ("b1", (H,)), ("W2", (T, H)), ("b2", (T,))]
        shapes = []
        for layer in range(1, self.layers + 1):
            d_in = C if layer == 1 else H
            shapes += [(f"W{g}{layer}", (H, d_in)) for g in _GATES]
            shapes += [(f"U{g}{layer}", (H, H)) for g in _GATES]
            shapes += [(f"b{g}{layer}", (H,)) for g in _GATES]
            shapes += [(f"c{g}{layer}", (H,)) for g in _GATES]
        return shapes + [("Wo", (1, H)), ("bo", (1,))]

    @property
    def n_weights(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.layout())


class Params:
    """Flat parameter vector plus named views into it."""

    def __init__(self, spec: ArchSpec, flat: np.ndarray | None = None):
        self.spec = spec
        if flat is None:
            flat = np.zeros(spec.n_weights)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (spec.n_weights,):
            raise ShapeError(f"{spec.arch} expects {spec.n_weights} weights, got {flat.size}")
        self.flat = flat
        self.views = unflatten(spec, flat)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.views[name]

    def copy(self) -> "Params":
        return Params(self.spec, self.flat.copy())


def unflatten(spec: ArchSpec, flat: np.ndarray) -> dict[str, np.ndarray]:
    views, offset = {}, 0
    for name, shape in spec.layout():
        size = int(np.prod(shape))
        views[name] = flat[offset:offset + size].reshape(shape)
        offset += size
    return views


def init_params(spec: ArchSpec, seed: int) -> Params:
    """Glorot-uniform matrices, zero biases."""
    rng = make_rng(seed)
    params = Params(spec)
    for name, shape in spec.layout():
        if len(shape) == 2:
            fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            params[name][...] = rng.uniform(-limit, limit, size=shape)
    return params


def sigmoid(x):
    return expit(np.asarray(x, dtype=np.float64))


def bce_with_logits(logits, targets, pos_weight: float = 1.0) -> float:
    """Mean binary cross-entropy computed from logits.

    With ``pos_weight == 1`` this is ``max(x, 0) - x*y + log1p(exp(-|x|))``.
    """
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.shape != y.shape:
        raise LengthMismatch(f"logits {x.shape} vs targets {y.shape}")
    softplus_neg = np.maximum(-x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    if pos_weight == 1.0:
        losses = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    else:
        losses = (1.0 - y) * x + (1.0 + (pos_weight - 1.0) * y) * softplus_neg
    return float(losses.mean())


def _bce_grad(x, y, pos_weight):
    if pos_weight == 1.0:
        return sigmoid(x) - y
    return (1.0 - y) - (1.0 + (pos_weight - 1.0) * y) * sigmoid(-x)


def _check_batch(spec: ArchSpec, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[np.newaxis]
    if X.ndim != 3 or X.shape[1:] != (spec.channels, spec.window_len):
        raise ShapeError(
            f"expected windows of shape ({spec.channels}, {spec.window_len}), got {X.shape[-2:]}"
        )
    return X


# ---------------------------------------------------------------- FCN

def _fcn_forward(p: Params, X):
    x = X.reshape(X.shape[0], -1)  # channel-major flatten
    pre = x @ p["W1"].T + p["b1"]
    h = np.maximum(pre, 0.0)
    return h @ p["W2"].T + p["b2"], (x, pre, h)


def _fcn_backward(p: Params, cache, dlogits, grad: Params):
    x, pre, h = cache
    grad["W2"][...] = dlogits.T @ h
    grad["b2"][...] = dlogits.sum(axis=0)
    dpre = (dlogits @ p["W2"]) * (pre > 0)
    grad["W1"][...] = dpre.T @ x
    grad["b1"][...] = dpre.sum(axis=0)


# ---------------------------------------------------------------- GRU

def _stack(p: Params, prefix: str, layer: int):
    return np.concatenate([p[f"{prefix}{g}{layer}"] for g in _GATES], axis=0)


def _gru_layer_forward(X, W, U, b, c):
    """One GRU layer over time-major input ``X`` of shape (T, B, D)."""
    T, B, _ = X.shape
    H = U.shape[1]
    # Hidden-side z/r biases add straight onto the input projection; only the
    # candidate's hidden bias sits inside the reset gate.
    bias = b.copy()
    bias[:2 * H] += c[:2 * H]
    c_n = c[2 * H:]
    xp = (X.reshape(T * B, -1) @ W.T + bias).reshape(T, B, 3 * H)
    UT = np.ascontiguousarray(U.T)
    hs = np.zeros((T + 1, B, H))
    zr = np.empty((T, B, 2 * H))
    ns = np.empty((T, B, H))
    hns = np.empty((T, B, H))
    for t in range(T):
        hp = hs[t] @ UT
        g = np.add(xp[t, :, :2 * H], hp[:, :2 * H], out=zr[t])
        # sigmoid(a) = (1 + tanh(a / 2)) / 2; much faster than expit here
        g *= 0.5
        np.tanh(g, out=g)
        g += 1.0
        g *= 0.5
        hn = np.add(hp[:, 2 * H:], c_n, out=hns[t])
        n = np.tanh(xp[t, :, 2 * H:] + zr[t, :, H:] * hn, out=ns[t])
        # h = (1 - z) * n + z * h_prev
        hs[t + 1] = n + zr[t, :, :H] * (hs[t] - n)
    return hs, (zr, ns, hns)


def _gru_layer_backward(X, W, U, hs, cache, dout, need_dx=True):
    """Backpropagate through time; returns (dX, dW, dU, db, dc)."""
    zr, ns, hns = cache
    T, B, H = dout.shape
    z, r = zr[..., :H], zr[..., H:]
    # Local derivative factors, computed for all timesteps at once.
    dn_dh = (1.0 - z) * (1.0 - ns * ns)
    dz_dh = (hs[:-1] - ns) * z * (1.0 - z)
    dr_dan = hns * r * (1.0 - r)
    z = np.ascontiguousarray(z)
    r = np.ascontiguousarray(r)
    # dhp holds gradients w.r.t. the hidden projection [z, r, n]; the input
    # projection shares the z and r parts and differs only in the n part.
    dhp = np.empty((T, B, 3 * H))
    dan_all = np.empty((T, B, H))
    dh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh += dout[t]
        dan = np.multiply(dh, dn_dh[t], out=dan_all[t])
        np.multiply(dh, dz_dh[t], out=dhp[t, :, :H])
        np.multiply(dan, dr_dan[t], out=dhp[t, :, H:2 * H])
        np.multiply(dan, r[t], out=dhp[t, :, 2 * H:])
        dh = dh * z[t] + dhp[t] @ U
    dxp = dhp.copy()
    dxp[..., 2 * H:] = dan_all
    flat_dxp = dxp.reshape(T * B, 3 * H)
    flat_dhp = dhp.reshape(T * B, 3 * H)
    dW = flat_dxp.T @ X.reshape(T * B, -1)
    dU = flat_dhp.T @ hs[:-1].reshape(T * B, H)
    dX = (flat_dxp @ W).reshape(T, B, -1) if need_dx else None
    return dX, dW, dU, flat_dxp.sum(axis=0), flat_dhp.sum(axis=0)


def _gru_forward(p: Params, X):
    spec = p.spec
    layer_in = np.ascontiguousarray(X.transpose(2, 0, 1))  # (T, B, C)
    caches = []
    for layer in range(1, spec.layers + 1):
        W, U = _stack(p, "W", layer), _stack(p, "U", layer)
        b, c = _stack(p, "b", layer), _stack(p, "c", layer)
        hs, cache = _gru_layer_forward(layer_in, W, U, b, c)
        caches.append((layer_in, W, U, hs, cache))
        layer_in = hs[1:]
    logits = (layer_in @ p["Wo"].T)[..., 0] + p["bo"][0]  # (T, B)
    return logits.T, caches


def _gru_backward(p: Params, caches, dlogits, grad: Params):
    spec = p.spec
    top = caches[-1][3][1:]  # (T, B, H)
    dl = dlogits.T  # (T, B)
    grad["Wo"][...] = (dl[..., None] * top).sum(axis=(0, 1))[None, :]
    grad["bo"][...] = dl.sum()
    dout = dl[..., None] * p["Wo"][0]
    for layer in range(spec.layers, 0, -1):
        layer_in, W, U, hs, cache = caches[layer - 1]
        dX, dW, dU, db, dc = _gru_layer_backward(layer_in, W, U, hs, cache, dout, need_dx=layer > 1)
        H = spec.hidden
        for i, g in enumerate(_GATES):
            rows = slice(i * H, (i + 1) * H)
            grad[f"W{g}{layer}"][...] = dW[rows]
            grad[f"U{g}{layer}"][...] = dU[rows]
            grad[f"b{g}{layer}"][...] = db[rows]
            grad[f"c{g}{layer}"][...] = dc[rows]
        dout = dX


# ---------------------------------------------------------------- public

def forward_logits(p: Params, X) -> np.ndarray:
    """Logits for a batch ``(B, channels, T)`` or a single window."""
    X = _check_batch(p.spec, X)
    if p.spec.arch == FCN:
        return _fcn_forward(p, X)[0]
    return _gru_forward(p, X)[0]


def fcn_forward(p: Params, window) -> np.ndarray:
    if p.spec.arch != FCN:
        raise ShapeError("parameters are not FCN parameters")
    return forward_logits(p, window)[0]


def gru_forward(p: Params, window) -> np.ndarray:
    if p.spec.arch != GRU:
        raise ShapeError("parameters are not GRU parameters")
    return forward_logits(p, window)[0]


def loss_and_gradient(p: Params, X, Y, pos_weight: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean BCE over every (window, timestep) of the batch and its exact gradient."""
    X = _check_batch(p.spec, X)
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    if Y.shape[1] != p.spec.window_len:
        raise ShapeError(f"targets have length {Y.shape[1]}, expected {p.spec.window_len}")
    grad = Params(p.spec)
    if p.spec.arch == FCN:
        logits, cache = _fcn_forward(p, X)
    else:
        logits, cache = _gru_forward(p, X)
    loss = bce_with_logits(logits, Y, pos_weight)
    dlogits = _bce_grad(logits, Y, pos_weight) / logits.size
    if p.spec.arch == FCN:
        _fcn_backward(p, cache, dlogits, grad)
    else:
        _gru_backward(p, cache, dlogits, grad)
    return loss, grad.flat


def compute_gradients(p: Params, batch, pos_weight: float = 1.0) -> tuple[np.ndarray, float]:
    """Gradient and loss for a list of :class:`~neurobeat.core.WindowPair`."""
    if not batch:
        raise ShapeError("empty batch")
    X = np.stack([w.eeg for w in batch])
    Y = np.stack([w.target for w in batch])
    loss, grad = loss_and_gradient(p, X, Y, pos_weight)
    return grad, loss
