"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tensor wraps a float64 ndarray.  Every differentiable kernel records
an entry on the active GradTape when any input requires gradients;
``backward`` replays the tape in reverse, accumulating gradients into
the ``.grad`` buffers of leaf tensors.  Execution order is a topological
order of the computation graph, so the reverse replay needs no explicit
sort.

The tape is process-global and is meant to be driven from a single
training thread.  Kernels themselves are pure functions of their inputs.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DimensionError

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class Tensor:
    """A float64 array plus an optional gradient buffer.

    Leaf tensors created with requires_grad=True get a zero-initialized
    ``.grad`` that ``backward`` accumulates into; call ``zero_grad``
    between optimization steps.
    """

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None

    @classmethod
    def _from_op(cls, data: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.data = data
        t.requires_grad = requires_grad
        t.grad = None
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return self.data.item()

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class GradTape:
    """Ordered record of executed ops: (output, inputs, grad_fn).

    grad_fn maps the output gradient to one gradient per input (None for
    inputs that do not require gradients).
    """

    def __init__(self):
        self._entries = []

    def record(self, out: Tensor, inputs: tuple, grad_fn):
        self._entries.append((out, inputs, grad_fn))

    def clear(self):
        self._entries.clear()

    def __len__(self):
        return len(self._entries)


_TAPE = GradTape()
_GRAD_ENABLED = True


def active_tape() -> GradTape:
    return _TAPE


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference, analysis)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _needs_grad(*tensors: Tensor) -> bool:
    return _GRAD_ENABLED and any(t.requires_grad for t in tensors)


def _record(out: Tensor, inputs: tuple, grad_fn):
    if out.requires_grad:
        _TAPE.record(out, inputs, grad_fn)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# ---------------------------------------------------------------------------
# elementwise and structural kernels
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._from_op(a.data + b.data, _needs_grad(a, b))

    def grad_fn(g):
        ga = _unbroadcast(g, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g, b.shape) if b.requires_grad else None
        return ga, gb

    _record(out, (a, b), grad_fn)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor._from_op(a.data * b.data, _needs_grad(a, b))

    def grad_fn(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    _record(out, (a, b), grad_fn)
    return out


def add_const(a: Tensor, c) -> Tensor:
    """a + c for a non-differentiable constant (scalar or ndarray)."""
    out = Tensor._from_op(a.data + c, _needs_grad(a))
    _record(out, (a,), lambda g: (_unbroadcast(g, a.shape),))
    return out


def mul_const(a: Tensor, c) -> Tensor:
    """a * c for a non-differentiable constant (scalar or ndarray)."""
    out = Tensor._from_op(a.data * c, _needs_grad(a))
    _record(out, (a,), lambda g: (_unbroadcast(g * c, a.shape),))
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor._from_op(a.data.reshape(shape), _needs_grad(a))
    _record(out, (a,), lambda g: (g.reshape(a.shape),))
    return out


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))
    out = Tensor._from_op(a.data.transpose(axes), _needs_grad(a))
    _record(out, (a,), lambda g: (g.transpose(inv),))
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product: 2-D x 2-D, or stacked with identical leading dims."""
    sa, sb = a.data.shape, b.data.shape
    ok = (
        len(sa) >= 2
        and len(sa) == len(sb)
        and sa[-1] == sb[-2]
        and sa[:-2] == sb[:-2]
    )
    if not ok:
        raise DimensionError(f"matmul shapes do not agree: {sa} x {sb}")
    out = Tensor._from_op(np.matmul(a.data, b.data), _needs_grad(a, b))

    def grad_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if b.requires_grad else None
        return ga, gb

    _record(out, (a, b), grad_fn)
    return out


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: table [n, d] indexed by an integer array of any shape."""
    ids = np.asarray(ids)
    out = Tensor._from_op(table.data[ids], _needs_grad(table))

    def grad_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    _record(out, (table,), grad_fn)
    return out


def take_positions(x: Tensor, batch_idx: np.ndarray, pos_idx: np.ndarray) -> Tensor:
    """Select rows x[b, t, :] for paired index arrays; output [n, d]."""
    batch_idx = np.asarray(batch_idx)
    pos_idx = np.asarray(pos_idx)
    out = Tensor._from_op(x.data[batch_idx, pos_idx], _needs_grad(x))

    def grad_fn(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (batch_idx, pos_idx), g)
        return (gx,)

    _record(out, (x,), grad_fn)
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor._from_op(np.asarray(a.data.sum()), _needs_grad(a))
    _record(out, (a,), lambda g: (np.broadcast_to(g, a.shape),))
    return out


def sum_last(a: Tensor) -> Tensor:
    """Sum over the last axis."""
    out = Tensor._from_op(a.data.sum(axis=-1), _needs_grad(a))
    _record(out, (a,), lambda g: (np.broadcast_to(g[..., None], a.shape),))
    return out


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = Tensor._from_op(np.asarray(a.data.mean()), _needs_grad(a))
    _record(out, (a,), lambda g: (np.broadcast_to(g / n, a.shape),))
    return out


# ---------------------------------------------------------------------------
# nonlinearities and normalizations
# ---------------------------------------------------------------------------


def sigmoid(a: Tensor) -> Tensor:
    """Elementwise logistic function, stable for large |x|."""
    x = a.data
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor._from_op(s, _needs_grad(a))
    _record(out, (a,), lambda g: (g * s * (1.0 - s),))
    return out


def gelu(a: Tensor) -> Tensor:
    """tanh-approximation GELU: 0.5*x*(1 + tanh(c*(x + 0.044715*x^3)))."""
    # written as in-place chains to curb temporaries on the FFN hot path
    x = a.data
    u = x * x
    u *= x
    u *= _GELU_A
    u += x
    u *= _GELU_C
    t = np.tanh(u, out=u)
    y = t + 1.0
    y *= x
    y *= 0.5
    out = Tensor._from_op(y, _needs_grad(a))

    def grad_fn(g):
        # d/dx = 0.5*(1+t) + 0.5*x*(1-t^2)*c*(1 + 3*0.044715*x^2)
        inner = x * (3.0 * _GELU_A)
        inner *= x
        inner += 1.0
        inner *= _GELU_C
        sech2 = t * t
        np.subtract(1.0, sech2, out=sech2)
        sech2 *= x
        sech2 *= inner
        t_total = t  # backward runs once; the tanh cache is free to consume
        t_total += 1.0
        t_total += sech2
        t_total *= 0.5
        t_total *= g
        return (t_total,)

    _record(out, (a,), grad_fn)
    return out


def softmax_rows(a: Tensor) -> Tensor:
    """Softmax over the last axis with max-subtraction for stability."""
    if a.data.ndim < 1 or a.data.shape[-1] == 0:
        raise DimensionError(f"softmax needs a nonempty last axis, got {a.shape}")
    y = a.data - a.data.max(axis=-1, keepdims=True)
    np.exp(y, out=y)
    y /= y.sum(axis=-1, keepdims=True)
    out = Tensor._from_op(y, _needs_grad(a))

    def grad_fn(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        gx = g - dot
        gx *= y
        return (gx,)

    _record(out, (a,), grad_fn)
    return out


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-12) -> Tensor:
    """Normalize over the last axis, then scale by gamma and shift by beta."""
    if eps <= 0:
        raise ContractError(f"layer_norm eps must be positive, got {eps}")
    d = x.data.shape[-1] if x.data.ndim else 0
    if d == 0:
        raise DimensionError("layer_norm needs a nonempty last axis")
    mu = x.data.mean(axis=-1, keepdims=True)
    xhat = x.data - mu
    sq = xhat * xhat
    var = sq.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat *= inv
    y = np.multiply(xhat, gamma.data, out=sq)
    y += beta.data
    out = Tensor._from_op(y, _needs_grad(x, gamma, beta))

    def grad_fn(g):
        lead = tuple(range(g.ndim - 1))
        gbeta = g.sum(axis=lead) if beta.requires_grad else None
        ggamma = None
        tmp = None
        if gamma.requires_grad:
            tmp = g * xhat
            ggamma = tmp.sum(axis=lead)
        gx = None
        if x.requires_grad:
            dxhat = g * gamma.data if tmp is None else np.multiply(g, gamma.data, out=tmp)
            m1 = dxhat.mean(axis=-1, keepdims=True)
            tm = dxhat * xhat
            m2 = tm.mean(axis=-1, keepdims=True)
            np.multiply(xhat, m2, out=tm)
            gx = dxhat
            gx -= m1
            gx -= tm
            gx *= inv
        return gx, ggamma, gbeta

    _record(out, (x, gamma, beta), grad_fn)
    return out


# ---------------------------------------------------------------------------
# fused losses
# ---------------------------------------------------------------------------


def bce_with_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy from logits, in the stable logit form.

    Per element: max(z, 0) - z*y + log(1 + exp(-|z|)), averaged over all
    entries.  Targets are a constant 0/1 array of the same shape.
    """
    y = np.asarray(targets, dtype=np.float64)
    if y.shape != logits.shape:
        raise DimensionError(
            f"bce targets shape {y.shape} does not match logits {logits.shape}"
        )
    z = logits.data
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    out = Tensor._from_op(np.asarray(per.mean()), _needs_grad(logits))

    def grad_fn(g):
        s = np.empty_like(z)
        pos = z >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        s[~pos] = ez / (1.0 + ez)
        return (g * (s - y) / z.size,)

    _record(out, (logits,), grad_fn)
    return out


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean of -log softmax(logits)[target] over rows; logits [n, v]."""
    t = np.asarray(targets, dtype=np.int64)
    n, v = logits.shape
    if t.shape != (n,):
        raise DimensionError(f"targets shape {t.shape} does not match rows {n}")
    if n == 0:
        raise ContractError("softmax_cross_entropy needs at least one row")
    if t.min() < 0 or t.max() >= v:
        raise ContractError(
            f"target id out of range: [{t.min()}, {t.max()}] vs vocab {v}"
        )
    z = logits.data
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    lse = m[:, 0] + np.log(e.sum(axis=-1))
    out = Tensor._from_op(np.asarray((lse - z[np.arange(n), t]).mean()), _needs_grad(logits))

    def grad_fn(g):
        p = e / e.sum(axis=-1, keepdims=True)
        p[np.arange(n), t] -= 1.0
        return (g * p / n,)

    _record(out, (logits,), grad_fn)
    return out


# ---------------------------------------------------------------------------
# reverse pass
# ---------------------------------------------------------------------------


def backward(loss: Tensor, tape: GradTape | None = None) -> dict:
    """Replay the tape in reverse from a scalar loss.

    Returns a map from every requires_grad tensor encountered on the
    tape to its gradient (zeros when not on a path to the loss), and
    accumulates into the ``.grad`` buffer of leaf tensors.  The tape is
    cleared afterward.
    """
    tp = tape if tape is not None else _TAPE
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    seen: dict[int, Tensor] = {}
    for out, inputs, _ in tp._entries:
        for t in (out, *inputs):
            if t.requires_grad:
                seen[id(t)] = t
    if loss.requires_grad:
        seen[id(loss)] = loss
    for out, inputs, grad_fn in reversed(tp._entries):
        g_out = grads.get(id(out))
        if g_out is None:
            continue
        in_grads = grad_fn(g_out)
        for t, g in zip(inputs, in_grads):
            if g is None or not t.requires_grad:
                continue
            prev = grads.get(id(t))
            grads[id(t)] = g if prev is None else prev + g
    result = {}
    for tid, t in seen.items():
        g = grads.get(tid)
        if g is None:
            g = np.zeros_like(t.data)
        else:
            g = np.asarray(g, dtype=np.float64)
            if g.shape != t.data.shape:
                g = np.broadcast_to(g, t.data.shape).copy()
        result[t] = g
        if t.grad is not None:
            t.grad += g
    tp.clear()
    return result
