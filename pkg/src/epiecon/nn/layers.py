"""Dense and recurrent building blocks with hand-written backward passes.

All layers operate on batches: a fully-connected layer maps (B, n_in) to
(B, n_out); the LSTM consumes (B, T, D) sequences and returns the final
hidden state (B, H). Forward passes return (output, cache); the matching
backward pass takes the cache plus the upstream gradient, accumulates
parameter gradients in place, and returns the gradient w.r.t. the input.
Functional caches make it safe to run several forward passes through the
same layer (clean + noise-perturbed) before backpropagating each one.
"""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, NumericError, ShapeError


def sigmoid(z):
    # tanh formulation avoids exp overflow for large |z|
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softplus(z):
    return np.logaddexp(0.0, z)


def _check_finite(arr, where):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {where}")


class Fc:
    """Fully-connected layer y = act(W x + b), act in {identity, tanh}."""

    ACTIVATIONS = ("identity", "tanh")

    def __init__(self, weights, bias, activation="identity", name="fc"):
        self.W = np.asarray(weights, dtype=float)
        self.b = np.asarray(bias, dtype=float)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeError(f"{name}: inconsistent shapes W{self.W.shape} b{self.b.shape}")
        if activation not in self.ACTIVATIONS:
            raise DomainError(f"{name}: unknown activation {activation!r}")
        _check_finite(self.W, f"{name} weights")
        _check_finite(self.b, f"{name} bias")
        self.activation = activation
        self.name = name
        self.gW = np.zeros_like(self.W)
        self.gb = np.zeros_like(self.b)

    @classmethod
    def init(cls, n_out, n_in, activation="identity", rng=None, name="fc"):
        rng = rng if rng is not None else np.random.default_rng()
        bound = 1.0 / np.sqrt(n_in)
        return cls(rng.uniform(-bound, bound, (n_out, n_in)), np.zeros(n_out), activation, name)

    @classmethod
    def zeros(cls, n_out, n_in, activation="identity", name="fc"):
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out), activation, name)

    @property
    def n_in(self):
        return self.W.shape[1]

    @property
    def n_out(self):
        return self.W.shape[0]

    def params(self):
        return {"W": self.W, "b": self.b}

    def grads(self):
        return {"W": self.gW, "b": self.gb}

    def zero_grads(self):
        self.gW[...] = 0.0
        self.gb[...] = 0.0

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeError(f"{self.name}: expected (B, {self.n_in}) input, got {x.shape}")
        z = x @ self.W.T + self.b
        y = np.tanh(z) if self.activation == "tanh" else z
        _check_finite(y, f"{self.name} forward")
        return y, (x, y)

    def backward(self, cache, dy):
        x, y = cache
        dz = dy * (1.0 - y * y) if self.activation == "tanh" else dy
        self.gW += dz.T @ x
        self.gb += dz.sum(axis=0)
        return dz @ self.W


class Lstm:
    """Single-layer unidirectional LSTM; forward returns the last hidden state.

    Gate pre-activations are stacked in order input, forget, output, candidate
    along the first axis of Wx (4H, D), Wh (4H, H) and b (4H,). The recurrence
    starts from h_0 = c_0 = 0.
    """

    def __init__(self, Wx, Wh, b, name="lstm"):
        self.Wx = np.asarray(Wx, dtype=float)
        self.Wh = np.asarray(Wh, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.Wx.ndim != 2 or self.Wx.shape[0] % 4 != 0:
            raise ShapeError(f"{name}: Wx must be (4H, D), got {self.Wx.shape}")
        H = self.Wx.shape[0] // 4
        if self.Wh.shape != (4 * H, H) or self.b.shape != (4 * H,):
            raise ShapeError(f"{name}: inconsistent gate shapes for H={H}")
        for arr, label in ((self.Wx, "Wx"), (self.Wh, "Wh"), (self.b, "b")):
            _check_finite(arr, f"{name} {label}")
        self.name = name
        self.gWx = np.zeros_like(self.Wx)
        self.gWh = np.zeros_like(self.Wh)
        self.gb = np.zeros_like(self.b)

    @classmethod
    def init(cls, hidden_size, input_size, rng=None, forget_bias=1.0, name="lstm"):
        rng = rng if rng is not None else np.random.default_rng()
        bx = 1.0 / np.sqrt(input_size)
        bh = 1.0 / np.sqrt(hidden_size)
        Wx = rng.uniform(-bx, bx, (4 * hidden_size, input_size))
        Wh = rng.uniform(-bh, bh, (4 * hidden_size, hidden_size))
        b = np.zeros(4 * hidden_size)
        b[hidden_size:2 * hidden_size] = forget_bias
        return cls(Wx, Wh, b, name)

    @classmethod
    def zeros(cls, hidden_size, input_size, name="lstm"):
        return cls(np.zeros((4 * hidden_size, input_size)),
                   np.zeros((4 * hidden_size, hidden_size)),
                   np.zeros(4 * hidden_size), name)

    @property
    def hidden_size(self):
        return self.Wx.shape[0] // 4

    @property
    def input_size(self):
        return self.Wx.shape[1]

    def params(self):
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b}

    def grads(self):
        return {"Wx": self.gWx, "Wh": self.gWh, "b": self.gb}

    def zero_grads(self):
        self.gWx[...] = 0.0
        self.gWh[...] = 0.0
        self.gb[...] = 0.0

    def forward(self, seq):
        seq = np.asarray(seq, dtype=float)
        if seq.ndim != 3 or seq.shape[2] != self.input_size:
            raise ShapeError(f"{self.name}: expected (B, T, {self.input_size}) input, got {seq.shape}")
        B, T, _ = seq.shape
        if T == 0:
            raise DomainError(f"{self.name}: empty sequence")
        H = self.hidden_size
        xp = seq @ self.Wx.T  # (B, T, 4H)
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        steps = []
        for t in range(T):
            z = xp[:, t] + h @ self.Wh.T + self.b
            i = sigmoid(z[:, :H])
            f = sigmoid(z[:, H:2 * H])
            o = sigmoid(z[:, 2 * H:3 * H])
            g = np.tanh(z[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            steps.append((h, c, i, f, o, g, tc))
            h = o * tc
            c = c_new
        _check_finite(h, f"{self.name} forward")
        return h, (seq, steps)

    def backward(self, cache, dh):
        seq, steps = cache
        B, T, _ = seq.shape
        H = self.hidden_size
        dseq = np.zeros_like(seq)
        dh = np.asarray(dh, dtype=float)
        dc = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h_prev, c_prev, i, f, o, g, tc = steps[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate(
                [di * i * (1.0 - i), df * f * (1.0 - f), do * o * (1.0 - o), dg * (1.0 - g * g)],
                axis=1,
            )
            self.gWx += dz.T @ seq[:, t]
            self.gWh += dz.T @ h_prev
            self.gb += dz.sum(axis=0)
            dseq[:, t] = dz @ self.Wx
            dh = dz @ self.Wh
            dc = dc * f
        return dseq


def concat(parts):
    """Left-to-right concatenation of 1-D vectors."""
    arrays = [np.asarray(p, dtype=float) for p in parts]
    for a in arrays:
        if a.size == 0:
            raise DomainError("concat parts must be nonempty")
    return np.concatenate(arrays)


def fc_forward(fc: Fc, x) -> np.ndarray:
    """Single-vector convenience wrapper around :meth:`Fc.forward`."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"fc_forward expects a vector, got shape {x.shape}")
    y, _ = fc.forward(x[None, :])
    return y[0]


def lstm_forward(lstm: Lstm, sequence) -> np.ndarray:
    """Single-sequence convenience wrapper: list of step vectors -> h_T."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2:
        raise ShapeError(f"lstm_forward expects (T, D) input, got shape {seq.shape}")
    h, _ = lstm.forward(seq[None, :, :])
    return h[0]
