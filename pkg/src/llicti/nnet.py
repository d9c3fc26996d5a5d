"""Just enough of a tensor engine to run and train the interpolator networks.

``Tensor`` wraps a numpy array and, when any input requires a gradient,
records a backward closure. ``Tensor.backward`` walks the recorded graph in
reverse topological order. Spatial tensors are channels-first,
``(C, H, W)``, optionally with batch axes after the channel axis:
``(C, N, H, W)``. That keeps every pointwise layer a single matrix product.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class Tensor:
    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        self.data = np.asarray(data)
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward_fn = backward_fn

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        """Reverse-mode sweep from this tensor; frees the graph afterwards."""
        if self._backward_fn is None:
            raise RuntimeError("backward: no recorded forward pass leads to this tensor")
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward: implicit gradient only for scalar outputs")
            grad = np.ones_like(self.data)
        order, seen = [], set()

        def visit(t):
            # iterative DFS; graphs here are shallow but wide
            stack = [(t, False)]
            while stack:
                node, done = stack.pop()
                if done:
                    order.append(node)
                    continue
                if id(node) in seen:
                    continue
                seen.add(id(node))
                stack.append((node, True))
                for p in node._parents:
                    if p.requires_grad and id(p) not in seen:
                        stack.append((p, False))

        visit(self)
        grads = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward_fn is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg
            node._parents = ()
            node._backward_fn = None


def parameter(data):
    return Tensor(data, requires_grad=True)


def _needs_grad(*ts):
    return any(isinstance(t, Tensor) and t.requires_grad for t in ts)


def _record(data, parents, backward_fn):
    if _needs_grad(*parents):
        return Tensor(data, True, tuple(parents), backward_fn)
    return Tensor(data)


@dataclass(frozen=True)
class ConvSpec:
    """Convolution geometry: one ``(row, col)`` input offset per kernel tap.

    Output pixel ``(u, v)`` reads input ``(u + dr, v + dc)`` for each tap,
    clamped to the input's extent (replicate padding).
    """

    in_channels: int
    out_channels: int
    kernel: tuple
    tap_offsets: tuple

    def __post_init__(self):
        kh, kw = self.kernel
        if len(self.tap_offsets) != kh * kw:
            raise ValueError(f"ConvSpec: {len(self.tap_offsets)} offsets for a {kh}x{kw} kernel")
        if list(self.tap_offsets) != sorted(set(self.tap_offsets)):
            raise ValueError("ConvSpec: tap offsets must be strictly increasing in row-major order")

    @classmethod
    def grid(cls, in_channels, out_channels, rows, cols):
        """Rectangular tap block: ``rows``/``cols`` are ranges of offsets."""
        rows, cols = list(rows), list(cols)
        offs = tuple((r, c) for r in rows for c in cols)
        return cls(in_channels, out_channels, (len(rows), len(cols)), offs)

    @classmethod
    def pointwise(cls, in_channels, out_channels):
        return cls(in_channels, out_channels, (1, 1), ((0, 0),))

    @property
    def is_pointwise(self):
        return self.tap_offsets == ((0, 0),)

    def row_offsets(self):
        return sorted({r for r, _ in self.tap_offsets})

    def col_offsets(self):
        return sorted({c for _, c in self.tap_offsets})


@lru_cache(maxsize=512)
def _tap_index(spec, in_hw, out_hw, batch):
    """Flat gather indices into ``(B * Hi * Wi)``, shape ``(taps, B, Ho * Wo)``.

    Out-of-range taps are clamped to the nearest edge sample.
    """
    hi, wi = in_hw
    ho, wo = out_hw
    u = np.arange(ho)
    v = np.arange(wo)
    idx = np.empty((len(spec.tap_offsets), ho * wo), dtype=np.intp)
    for t, (dr, dc) in enumerate(spec.tap_offsets):
        rr = np.clip(u + dr, 0, hi - 1)
        cc = np.clip(v + dc, 0, wi - 1)
        idx[t] = (rr[:, None] * wi + cc[None, :]).ravel()
    return idx[:, None, :] + (np.arange(batch) * (hi * wi))[None, :, None]


def conv2d(x, weight, bias, spec, out_shape=None):
    """Tap-list convolution with replicate padding.

    ``x``: ``(Cin, ..., Hi, Wi)``, channels first with any batch axes in
    between; ``weight``: ``(Cout, Cin, kh, kw)``; ``bias``: ``(Cout,)``.
    ``out_shape`` is the target ``(Ho, Wo)`` and defaults to the input's
    spatial shape. A zero-sized input contributes nothing, so the output is
    just the bias.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    xd = x.data
    cin, hi, wi = xd.shape[0], xd.shape[-2], xd.shape[-1]
    mid = xd.shape[1:-2]
    nb = int(np.prod(mid, dtype=np.int64))
    kh, kw = spec.kernel
    if cin != spec.in_channels or weight.shape != (spec.out_channels, cin, kh, kw):
        raise ValueError(
            f"conv2d: input has {cin} channels, weight {weight.shape}, spec expects "
            f"({spec.out_channels}, {spec.in_channels}, {kh}, {kw})"
        )
    if bias.shape != (spec.out_channels,):
        raise ValueError(f"conv2d: bias shape {bias.shape}, expected ({spec.out_channels},)")
    ho, wo = out_shape if out_shape is not None else (hi, wi)
    ho, wo = int(ho), int(wo)
    cout = spec.out_channels
    w2 = weight.data.reshape(cout, cin * kh * kw)
    dtype = np.result_type(xd, weight.data)
    direct = spec.is_pointwise and (ho, wo) == (hi, wi)

    if hi == 0 or wi == 0:
        cols = None
        out = np.broadcast_to(bias.data[:, None], (cout, nb * ho * wo)).astype(dtype)
    else:
        if direct:
            cols = xd.reshape(cin, nb * hi * wi)
        else:
            idx = _tap_index(spec, (int(hi), int(wi)), (ho, wo), nb)
            # (Cin, taps, B, P): rows ordered (channel, tap) like the weight matrix
            cols = xd.reshape(cin, nb * hi * wi)[:, idx].reshape(cin * kh * kw, nb * ho * wo)
        out = w2 @ cols
        out += bias.data[:, None]
    out = out.reshape((cout,) + mid + (ho, wo))

    def backward(g):
        g = g.reshape(cout, -1)
        gb = g.sum(axis=1)
        if cols is None:
            return None, np.zeros_like(weight.data), gb
        gw = (g @ cols.T).reshape(weight.shape)
        gx = None
        if x.requires_grad:
            gcols = w2.T @ g
            if direct:
                gx = gcols.reshape(xd.shape)
            else:
                flat = np.zeros((cin, nb * hi * wi), dtype=g.dtype)
                gcols = gcols.reshape(cin, -1)
                for c in range(cin):
                    flat[c] = np.bincount(idx.ravel(), weights=gcols[c], minlength=nb * hi * wi)
                gx = flat.reshape(xd.shape)
        return gx, gw, gb

    return _record(out, (x, weight, bias), backward)


def relu(x):
    x = x if isinstance(x, Tensor) else Tensor(x)
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.data.dtype)
    return _record(out, (x,), lambda g: (g * mask,))


def add(*xs):
    xs = [t if isinstance(t, Tensor) else Tensor(t) for t in xs]
    out = xs[0].data
    for t in xs[1:]:
        out = out + t.data
    return _record(out, xs, lambda g: tuple(g for _ in xs))


def scale(x, factor):
    x = x if isinstance(x, Tensor) else Tensor(x)
    return _record(x.data * factor, (x,), lambda g: (g * factor,))


def tensor_sum(x):
    x = x if isinstance(x, Tensor) else Tensor(x)
    return _record(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, x.shape),))


def custom_op(value, inputs, grads):
    """Wrap a scalar ``value`` whose input gradients were computed alongside it."""
    def backward(g):
        return tuple(None if gi is None else gi * g for gi in grads)

    return _record(np.asarray(value), tuple(inputs), backward)


class AdamState:
    def __init__(self, params):
        self.step = 0
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on ``params[i].data``."""
    state.step += 1
    t = state.step
    c1 = 1 - beta1 ** t
    c2 = 1 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.data)
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
