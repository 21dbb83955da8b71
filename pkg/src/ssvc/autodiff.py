"""Dense tensors with reverse-mode automatic differentiation.

Every value is a row-major float64 numpy array wrapped in a `Tensor`.
Each operation records its inputs and a backward closure on the output
tensor; `backward()` on a scalar loss replays those closures in reverse
topological order, accumulating into `.grad` of every tensor that was
created with `requires_grad=True`.

Deliberately small surface: 2-D matmul, same-shape elementwise ops with
row-wise bias broadcast as the single broadcasting exception, numerically
stable softmax / log-softmax along the last axis, concatenation, and a
scalar-weighted row combination. No GPU, no higher-order gradients.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A dense float64 array node in a reverse-mode differentiation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, np.ndarray):
            self.data = data.astype(np.float64, copy=False)
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._consumed = False

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; all semantics live in the module-level functions
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def _result(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accum(t, g):
    if t.grad is None:
        t.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g, dtype=np.float64)
    else:
        t.grad = t.grad + g


def tensor(data, requires_grad=False):
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False):
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a 2-D (m,k) by a 2-D (k,n) tensor."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul inner dimensions disagree: {a.data.shape} x {b.data.shape}")
    out_data = a.data @ b.data

    def _back(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _result(out_data, (a, b), _back)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; also accepts matrix (m,n) + row vector (n,) for biases."""
    bias_case = a.data.ndim == 2 and b.data.ndim == 1 and a.data.shape[1] == b.data.shape[0]
    if not bias_case and a.data.shape != b.data.shape:
        raise ValueError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out_data = a.data + b.data

    def _back(g):
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, g.sum(axis=0) if bias_case else g)

    return _result(out_data, (a, b), _back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"sub shape mismatch: {a.data.shape} vs {b.data.shape}")
    out_data = a.data - b.data

    def _back(g):
        if a.requires_grad:
            _accum(a, g)
        if b.requires_grad:
            _accum(b, -g)

    return _result(out_data, (a, b), _back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ValueError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out_data = a.data * b.data

    def _back(g):
        if a.requires_grad:
            _accum(a, g * b.data)
        if b.requires_grad:
            _accum(b, g * a.data)

    return _result(out_data, (a, b), _back)


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a Python constant (no gradient for the constant)."""
    out_data = a.data * c

    def _back(g):
        _accum(a, g * c)

    return _result(out_data, (a,), _back)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def _back(g):
        _accum(a, g * (1.0 - y * y))

    return _result(y, (a,), _back)


def sigmoid(a: Tensor) -> Tensor:
    # split by sign so exp never overflows
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def _back(g):
        _accum(a, g * y * (1.0 - y))

    return _result(y, (a,), _back)


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)

    def _back(g):
        _accum(a, g * (a.data > 0))

    return _result(y, (a,), _back)


def log(a: Tensor) -> Tensor:
    """Natural log; caller guarantees positive input (used on softmax outputs)."""
    y = np.log(a.data)

    def _back(g):
        _accum(a, g / a.data)

    return _result(y, (a,), _back)


def stable_softmax(a: Tensor) -> Tensor:
    """Max-subtracted softmax along the last axis; invariant to adding a constant."""
    if a.data.ndim == 0 or a.data.shape[-1] == 0:
        raise ValueError(f"softmax needs a non-empty last axis, got shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=-1, keepdims=True)

    def _back(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accum(a, y * (g - dot))

    return _result(y, (a,), _back)


def log_softmax(a: Tensor) -> Tensor:
    """log(softmax(x)) along the last axis, computed without forming the quotient."""
    if a.data.ndim == 0 or a.data.shape[-1] == 0:
        raise ValueError(f"log_softmax needs a non-empty last axis, got shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    y = shifted - lse
    soft = np.exp(y)

    def _back(g):
        _accum(a, g - soft * g.sum(axis=-1, keepdims=True))

    return _result(y, (a,), _back)


def concat(tensors, axis=0) -> Tensor:
    """Concatenate along `axis`; gradient splits back to the sources."""
    if not tensors:
        raise ValueError("concat of an empty tensor list")
    ndim = tensors[0].data.ndim
    for t in tensors[1:]:
        if t.data.ndim != ndim:
            raise ValueError("concat rank mismatch")
        for ax in range(ndim):
            if ax != axis and t.data.shape[ax] != tensors[0].data.shape[ax]:
                raise ValueError(
                    f"concat shape mismatch off axis {axis}: "
                    f"{tensors[0].data.shape} vs {t.data.shape}"
                )
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def _back(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * ndim
                idx[axis] = slice(lo, hi)
                _accum(t, g[tuple(idx)])

    return _result(out_data, tensors, _back)


def weighted_sum(h: Tensor, w: Tensor) -> Tensor:
    """Sum_t w[t] * h[t] for h of shape (T, d) and weights w of shape (T,)."""
    if h.data.ndim != 2 or w.data.ndim != 1 or h.data.shape[0] != w.data.shape[0]:
        raise ValueError(f"weighted_sum length mismatch: h {h.data.shape}, w {w.data.shape}")
    out_data = h.data.T @ w.data

    def _back(g):
        if h.requires_grad:
            _accum(h, np.outer(w.data, g))
        if w.requires_grad:
            _accum(w, h.data @ g)

    return _result(out_data, (h, w), _back)


def repeat_rows(v: Tensor, n: int) -> Tensor:
    """Tile a (d,) vector into an (n, d) matrix; gradient sums back over rows."""
    if v.data.ndim != 1:
        raise ValueError(f"repeat_rows expects a vector, got shape {v.data.shape}")
    out_data = np.tile(v.data, (n, 1))

    def _back(g):
        _accum(v, g.sum(axis=0))

    return _result(out_data, (v,), _back)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape
    out_data = a.data.reshape(shape)

    def _back(g):
        _accum(a, g.reshape(orig))

    return _result(out_data, (a,), _back)


def gather_rows(m: Tensor, ids) -> Tensor:
    """Select rows of a (V, d) matrix; gradient accumulates into the picked rows."""
    ids = np.asarray(ids, dtype=np.intp)
    if ids.ndim != 1:
        raise ValueError("gather_rows expects a flat id list")
    v = m.data.shape[0]
    bad = ids[(ids < 0) | (ids >= v)]
    if bad.size:
        raise IndexError(f"row id {int(bad[0])} out of range for {v} rows")
    out_data = m.data[ids]

    def _back(g):
        dm = np.zeros_like(m.data)
        np.add.at(dm, ids, g)
        _accum(m, dm)

    return _result(out_data, (m,), _back)


def take_per_row(m: Tensor, ids) -> Tensor:
    """Pick element ids[i] from row i of a (P, V) matrix, yielding shape (P,)."""
    ids = np.asarray(ids, dtype=np.intp)
    if m.data.ndim != 2 or ids.shape != (m.data.shape[0],):
        raise ValueError(f"take_per_row needs one id per row: m {m.data.shape}, ids {ids.shape}")
    rows = np.arange(m.data.shape[0])
    out_data = m.data[rows, ids]

    def _back(g):
        dm = np.zeros_like(m.data)
        dm[rows, ids] = g
        _accum(m, dm)

    return _result(out_data, (m,), _back)


def sum_all(a: Tensor) -> Tensor:
    """Reduce to a scalar (shape ()) tensor."""
    out_data = np.asarray(a.data.sum())

    def _back(g):
        _accum(a, np.full_like(a.data, float(g)))

    return _result(out_data, (a,), _back)


def backward(loss: Tensor) -> None:
    """Populate `.grad` of every reachable requires_grad tensor from a scalar loss.

    The recorded graph is single-use: a second call on the same root raises.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if loss._consumed:
        raise RuntimeError("graph already consumed by a previous backward pass")
    loss._consumed = True

    # iterative reverse topological order; recursion would overflow on long chains
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    loss.grad = np.ones(())
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
