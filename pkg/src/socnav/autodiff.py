"""Minimal reverse-mode automatic differentiation over numpy float64 arrays.

Operations append to a :class:`Tape` in execution order (a Wengert list);
:meth:`Tape.backward` walks it in reverse.  A tape built with
``record=False`` evaluates the same arithmetic without keeping any graph,
which is what rollouts use.
"""

from __future__ import annotations

import numpy as np


class Var:
    __slots__ = ("value", "grad", "backward", "parents", "name", "needs_grad")

    def __init__(self, value, parents=(), backward=None, name=None, needs_grad=True):
        self.value = value
        self.grad = None
        self.parents = parents
        self.backward = backward
        self.name = name
        self.needs_grad = needs_grad

    @property
    def shape(self):
        return self.value.shape

    def _accum(self, g):
        if not self.needs_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g


class Tape:
    def __init__(self, record: bool = True):
        self.record = record
        self.nodes = []
        self.params = {}

    def const(self, value) -> Var:
        return Var(np.asarray(value, dtype=np.float64), needs_grad=False)

    def param(self, name, value) -> Var:
        v = self.params.get(name)
        if v is None:
            v = Var(value, name=name)
            self.params[name] = v
        return v

    def _node(self, value, parents, backward) -> Var:
        out = Var(value, parents, backward)
        if self.record:
            self.nodes.append(out)
        return out

    def backward(self, loss: Var):
        if not self.record:
            raise RuntimeError("tape was not recording")
        if loss.value.size != 1:
            raise ValueError("backward needs a scalar loss")
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            if node.grad is not None and node.backward is not None:
                node.backward(node.grad)

    def grads(self):
        return {k: (v.grad if v.grad is not None else np.zeros_like(v.value))
                for k, v in self.params.items()}

    # -- elementwise ------------------------------------------------------

    def add(self, a: Var, b: Var) -> Var:
        def bw(g):
            a._accum(_unbroadcast(g, a.value.shape))
            b._accum(_unbroadcast(g, b.value.shape))
        return self._node(a.value + b.value, (a, b), bw)

    def sub(self, a: Var, b: Var) -> Var:
        def bw(g):
            a._accum(_unbroadcast(g, a.value.shape))
            b._accum(_unbroadcast(-g, b.value.shape))
        return self._node(a.value - b.value, (a, b), bw)

    def mul(self, a: Var, b: Var) -> Var:
        def bw(g):
            a._accum(_unbroadcast(g * b.value, a.value.shape))
            b._accum(_unbroadcast(g * a.value, b.value.shape))
        return self._node(a.value * b.value, (a, b), bw)

    def scale(self, a: Var, c: float) -> Var:
        return self._node(a.value * c, (a,), lambda g: a._accum(g * c))

    def square(self, a: Var) -> Var:
        return self._node(a.value * a.value, (a,), lambda g: a._accum(2.0 * g * a.value))

    def exp(self, a: Var) -> Var:
        y = np.exp(a.value)
        return self._node(y, (a,), lambda g: a._accum(g * y))

    def relu(self, a: Var) -> Var:
        m = a.value > 0
        return self._node(np.where(m, a.value, 0.0), (a,), lambda g: a._accum(g * m))

    def sigmoid(self, a: Var) -> Var:
        y = _sigmoid(a.value)
        return self._node(y, (a,), lambda g: a._accum(g * y * (1.0 - y)))

    def tanh(self, a: Var) -> Var:
        y = np.tanh(a.value)
        return self._node(y, (a,), lambda g: a._accum(g * (1.0 - y * y)))

    def clip(self, a: Var, lo: float, hi: float) -> Var:
        m = (a.value >= lo) & (a.value <= hi)
        return self._node(np.clip(a.value, lo, hi), (a,), lambda g: a._accum(g * m))

    def minimum(self, a: Var, b: Var) -> Var:
        # ties send the gradient to ``a``
        m = a.value <= b.value

        def bw(g):
            a._accum(_unbroadcast(g * m, a.value.shape))
            b._accum(_unbroadcast(g * ~m, b.value.shape))
        return self._node(np.where(m, a.value, b.value), (a, b), bw)

    # -- reductions and shape ----------------------------------------------

    def sum(self, a: Var, axis=None) -> Var:
        shape = a.value.shape

        def bw(g):
            if axis is None:
                a._accum(np.broadcast_to(g, shape))
            else:
                a._accum(np.broadcast_to(np.expand_dims(g, axis), shape))
        return self._node(np.asarray(a.value.sum(axis=axis)), (a,), bw)

    def mean(self, a: Var) -> Var:
        n = a.value.size
        shape = a.value.shape
        return self._node(np.asarray(a.value.mean()), (a,),
                          lambda g: a._accum(np.broadcast_to(g / n, shape)))

    def reshape(self, a: Var, shape) -> Var:
        old = a.value.shape
        return self._node(a.value.reshape(shape), (a,), lambda g: a._accum(g.reshape(old)))

    def stack(self, xs) -> Var:
        xs = list(xs)

        def bw(g):
            for k, x in enumerate(xs):
                x._accum(g[k])
        return self._node(np.stack([x.value for x in xs]), tuple(xs), bw)

    def concat(self, xs) -> Var:
        """Concatenate along the last axis."""
        xs = list(xs)
        sizes = np.cumsum([x.value.shape[-1] for x in xs])[:-1]

        def bw(g):
            for x, part in zip(xs, np.split(g, sizes, axis=-1)):
                x._accum(part)
        return self._node(np.concatenate([x.value for x in xs], axis=-1), tuple(xs), bw)

    def take(self, a: Var, index) -> Var:
        """``a[..., index[...]]``: pick one entry along the last axis per leading position."""
        idx = np.asarray(index)[..., None]

        def bw(g):
            full = np.zeros_like(a.value)
            np.put_along_axis(full, idx, g[..., None], axis=-1)
            a._accum(full)
        return self._node(np.take_along_axis(a.value, idx, axis=-1)[..., 0], (a,), bw)

    def log_softmax(self, a: Var) -> Var:
        y = _log_softmax(a.value)

        def bw(g):
            p = np.exp(y)
            a._accum(g - p * g.sum(axis=-1, keepdims=True))
        return self._node(y, (a,), bw)

    # -- fused layers -------------------------------------------------------

    def linear(self, x: Var, w: Var, b: Var | None = None) -> Var:
        """``x @ w + b`` for ``x`` of shape ``(..., in)``."""
        y = x.value @ w.value
        if b is not None:
            y = y + b.value

        def bw(g):
            x2 = x.value.reshape(-1, x.value.shape[-1])
            g2 = g.reshape(-1, g.shape[-1])
            w._accum(x2.T @ g2)
            if b is not None:
                b._accum(g2.sum(axis=0))
            if x.needs_grad:
                x._accum(g @ w.value.T)
        parents = (x, w) if b is None else (x, w, b)
        return self._node(y, parents, bw)

    def gru_cell(self, x: Var, h: Var, wx: Var, wh: Var, bx: Var, bh: Var) -> Var:
        """Gated recurrent unit, gates ordered (reset, update, candidate)."""
        n_h = h.value.shape[-1]
        gx = x.value @ wx.value + bx.value
        gh = h.value @ wh.value + bh.value
        r = _sigmoid(gx[:, :n_h] + gh[:, :n_h])
        z = _sigmoid(gx[:, n_h:2 * n_h] + gh[:, n_h:2 * n_h])
        hn = gh[:, 2 * n_h:]
        n = np.tanh(gx[:, 2 * n_h:] + r * hn)
        out = (1.0 - z) * n + z * h.value

        def bw(g):
            dn = g * (1.0 - z) * (1.0 - n * n)
            dz = g * (h.value - n) * z * (1.0 - z)
            dr = dn * hn * r * (1.0 - r)
            d_gx = np.concatenate([dr, dz, dn], axis=1)
            d_gh = np.concatenate([dr, dz, dn * r], axis=1)
            wx._accum(x.value.T @ d_gx)
            bx._accum(d_gx.sum(axis=0))
            wh._accum(h.value.T @ d_gh)
            bh._accum(d_gh.sum(axis=0))
            if x.needs_grad:
                x._accum(d_gx @ wx.value.T)
            if h.needs_grad:
                h._accum(d_gh @ wh.value.T + g * z)
        return self._node(out, (x, h, wx, wh, bx, bh), bw)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _sigmoid(x):
    # tanh form cannot overflow
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def _log_softmax(z):
    m = z.max(axis=-1, keepdims=True)
    s = z - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def numeric_grad(f, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros(x.shape)
    # index x directly: reshape(-1) silently copies non-contiguous arrays
    for i in np.ndindex(x.shape):
        orig = x[i]
        x[i] = orig + eps
        fp = f()
        x[i] = orig - eps
        fm = f()
        x[i] = orig
        g[i] = (fp - fm) / (2.0 * eps)
    return g
