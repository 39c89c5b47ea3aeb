"""Dense tensors with reverse-mode automatic differentiation.

A Tensor wraps a numpy array (row-major scalars) plus a gradient slot. Every
non-leaf tensor records which operation produced it: the op name, references
to its input tensors, and a backward closure holding the saved forward
values. ``backward(loss)`` topologically orders that record and accumulates
gradients into every reachable leaf with ``requires_grad``.

Two precisions are supported: single (float32, the training default) and wide
(float64, used for gradient checking). Reductions (matmul, sums, softmax
denominators, norms) always accumulate in float64 before casting back, so
row sums and convex combinations stay tight even in single precision and
permuting summation order does not change results.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DegenerateVectorError, ShapeError

EPS_NORM = 1e-12

_default_dtype = np.float32


def default_dtype():
    return _default_dtype


def set_default_dtype(dtype):
    global _default_dtype
    if dtype not in (np.float32, np.float64):
        raise ContractError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _default_dtype = dtype


@contextmanager
def wide_precision():
    """Run the enclosed block with float64 as the default scalar type."""
    global _default_dtype
    saved = _default_dtype
    _default_dtype = np.float64
    try:
        yield
    finally:
        _default_dtype = saved


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "op", "inputs", "_backward")

    def __init__(self, data, requires_grad=False, op="leaf", inputs=(), backward=None):
        if isinstance(data, Tensor):
            data = data.data
        if isinstance(data, np.generic):
            data = np.asarray(data)  # numpy scalar: keep its dtype
        elif not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=default_dtype())
        self.data = data
        self.requires_grad = requires_grad
        self.grad = None
        self.op = op
        self.inputs = inputs
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def T(self):
        return transpose(self)

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, shape):
        return reshape(self, shape)

    def sum(self):
        return sum_all(self)


def tensor(data, requires_grad=False, dtype=None):
    """Leaf tensor from array-like data, in the default (or given) dtype."""
    arr = np.asarray(data, dtype=dtype or default_dtype())
    return Tensor(arr, requires_grad=requires_grad)


def zeros(shape, requires_grad=False, dtype=None):
    return Tensor(np.zeros(shape, dtype=dtype or default_dtype()), requires_grad=requires_grad)


def glorot_uniform(rng, shape, requires_grad=True, dtype=None):
    """Uniform init in +-sqrt(6 / (fan_in + fan_out)); biases should use zeros."""
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) > 1 else (shape[0], shape[0])
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    data = rng.uniform(-bound, bound, size=shape).astype(dtype or default_dtype())
    return Tensor(data, requires_grad=requires_grad)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else tensor(x)


def _coerce_pair(a, b):
    """Tensor-ify both operands; raw python scalars adopt the other side's dtype."""
    if isinstance(a, Tensor) and not isinstance(b, (Tensor, np.ndarray)):
        return a, tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor) and not isinstance(a, (Tensor, np.ndarray)):
        return tensor(a, dtype=b.dtype), b
    return _as_tensor(a), _as_tensor(b)


def _result(data, op, inputs, backward):
    needs = any(t.requires_grad for t in inputs)
    return Tensor(data, requires_grad=needs, op=op, inputs=tuple(inputs) if needs else (),
                  backward=backward if needs else None)


def _unbroadcast(grad, shape):
    """Sum grad down to `shape` after numpy broadcasting."""
    extra = grad.ndim - len(shape)
    for _ in range(extra):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = _coerce_pair(a, b)
    out = a.data + b.data

    def backward(g):
        return _unbroadcast(g, a.shape).astype(a.dtype), _unbroadcast(g, b.shape).astype(b.dtype)

    return _result(out, "add", (a, b), backward)


def sub(a, b):
    a, b = _coerce_pair(a, b)
    out = a.data - b.data

    def backward(g):
        return _unbroadcast(g, a.shape).astype(a.dtype), _unbroadcast(-g, b.shape).astype(b.dtype)

    return _result(out, "sub", (a, b), backward)


def mul(a, b):
    a, b = _coerce_pair(a, b)
    out = a.data * b.data

    def backward(g):
        return (_unbroadcast(g * b.data, a.shape).astype(a.dtype),
                _unbroadcast(g * a.data, b.shape).astype(b.dtype))

    return _result(out, "mul", (a, b), backward)


def neg(a):
    a = _as_tensor(a)
    return _result(-a.data, "neg", (a,), lambda g: (-g,))


def matmul(a, b):
    """Matrix product of two 2-D tensors; inner dimensions must agree."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out = _mm64(a.data, b.data, np.result_type(a.dtype, b.dtype))

    def backward(g):
        return _mm64(g, b.data.T, a.dtype), _mm64(a.data.T, g, b.dtype)

    return _result(out, "matmul", (a, b), backward)


def _mm64(x, y, out_dtype):
    return (x.astype(np.float64, copy=False) @ y.astype(np.float64, copy=False)).astype(out_dtype)


def transpose(a, axes=None):
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = tuple(np.argsort(axes))

    def backward(g):
        return (np.transpose(g, inv),)

    return _result(out, "transpose", (a,), backward)


def reshape(a, shape):
    a = _as_tensor(a)
    out = np.reshape(a.data, shape)
    orig = a.shape

    def backward(g):
        return (np.reshape(g, orig),)

    return _result(out, "reshape", (a,), backward)


def relu(a):
    """Elementwise max(0, x); the subgradient at exactly 0 is defined as 0."""
    a = _as_tensor(a)
    mask = a.data > 0
    out = np.where(mask, a.data, a.dtype.type(0))

    def backward(g):
        return (g * mask,)

    return _result(out, "relu", (a,), backward)


def tanh_act(a):
    a = _as_tensor(a)
    out = np.tanh(a.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _result(out, "tanh", (a,), backward)


def sum_all(a):
    a = _as_tensor(a)
    out = np.asarray(np.sum(a.data, dtype=np.float64)).astype(a.dtype)
    shape = a.shape

    def backward(g):
        return (np.broadcast_to(g, shape).astype(a.dtype),)

    return _result(out, "sum", (a,), backward)


def softmax_rows(a):
    """Row-wise softmax of a 2-D tensor, with per-row max subtraction.

    Every output row is positive and sums to 1 (within float rounding of the
    output dtype); exp and the denominator are evaluated in float64.
    """
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"softmax_rows expects a 2-D tensor, got shape {a.shape}")
    x = a.data.astype(np.float64, copy=False)
    e = np.exp(x - x.max(axis=1, keepdims=True))
    y64 = e / e.sum(axis=1, keepdims=True)
    out = y64.astype(a.dtype)

    def backward(g):
        inner = np.sum(g * out, axis=1, keepdims=True, dtype=np.float64).astype(a.dtype)
        return (out * (g - inner),)

    return _result(out, "softmax_rows", (a,), backward)


def l2_normalize(v):
    """v / ||v||_2 for a 1-D tensor; rejects (near-)zero vectors."""
    v = _as_tensor(v)
    if v.ndim != 1:
        raise ShapeError(f"l2_normalize expects a 1-D tensor, got shape {v.shape}")
    norm = float(np.sqrt(np.sum(v.data.astype(np.float64) ** 2)))
    if norm <= EPS_NORM:
        raise DegenerateVectorError(f"cannot normalize a vector with norm {norm:.3e}")
    y64 = v.data.astype(np.float64) / norm
    out = y64.astype(v.dtype)

    def backward(g):
        proj = np.sum(g.astype(np.float64) * y64, dtype=np.float64)
        return (((g - (y64 * proj).astype(v.dtype)) / v.dtype.type(norm)),)

    return _result(out, "l2_normalize", (v,), backward)


def normalize_rows(a):
    """Independent l2_normalize of every row of a 2-D tensor."""
    a = _as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"normalize_rows expects a 2-D tensor, got shape {a.shape}")
    x64 = a.data.astype(np.float64, copy=False)
    norms = np.sqrt(np.sum(x64 ** 2, axis=1, keepdims=True))
    if np.any(norms <= EPS_NORM):
        bad = int(np.argmin(norms))
        raise DegenerateVectorError(f"row {bad} has norm {float(norms[bad, 0]):.3e}")
    y64 = x64 / norms
    out = y64.astype(a.dtype)

    def backward(g):
        proj = np.sum(g.astype(np.float64) * y64, axis=1, keepdims=True)
        return (((g - (y64 * proj).astype(a.dtype)) / norms.astype(a.dtype)),)

    return _result(out, "normalize_rows", (a,), backward)


def cosine(u, v):
    """cos(u, v) = u.v / (||u|| ||v||), clamped into [-1, 1]; scalar output."""
    u, v = _as_tensor(u), _as_tensor(v)
    if u.shape != v.shape or u.ndim != 1:
        raise ShapeError(f"cosine expects matching 1-D tensors, got {u.shape} and {v.shape}")
    u64 = u.data.astype(np.float64)
    v64 = v.data.astype(np.float64)
    nu = float(np.sqrt(np.sum(u64 ** 2)))
    nv = float(np.sqrt(np.sum(v64 ** 2)))
    if nu <= EPS_NORM or nv <= EPS_NORM:
        raise DegenerateVectorError(f"cosine of a degenerate vector (norms {nu:.3e}, {nv:.3e})")
    uhat, vhat = u64 / nu, v64 / nv
    c = float(np.clip(np.dot(uhat, vhat), -1.0, 1.0))
    out = np.asarray(c).astype(np.result_type(u.dtype, v.dtype))

    def backward(g):
        gs = float(g)
        gu = gs * (vhat - c * uhat) / nu
        gv = gs * (uhat - c * vhat) / nv
        return gu.astype(u.dtype), gv.astype(v.dtype)

    return _result(out, "cosine", (u, v), backward)


def frobenius_sq(a):
    """Sum of squared entries (squared Frobenius norm), as a scalar tensor."""
    a = _as_tensor(a)
    out = np.asarray(np.sum(a.data.astype(np.float64) ** 2)).astype(a.dtype)

    def backward(g):
        return ((2.0 * float(g) * a.data).astype(a.dtype),)

    return _result(out, "frobenius_sq", (a,), backward)


def take_rows(a, indices):
    """Rows of a 2-D tensor selected by an index sequence; backward scatters."""
    a = _as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)
    out = a.data[idx]

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, idx, g)
        return (acc,)

    return _result(out, "take_rows", (a,), backward)


def take_entries(a, rows, cols):
    """Vector of entries a[rows[i], cols[i]]; backward scatters into a."""
    a = _as_tensor(a)
    r = np.asarray(rows, dtype=np.int64)
    c = np.asarray(cols, dtype=np.int64)
    out = a.data[r, c]

    def backward(g):
        acc = np.zeros_like(a.data)
        np.add.at(acc, (r, c), g)
        return (acc,)

    return _result(out, "take_entries", (a,), backward)


def stack_rows(vectors):
    """Stack 1-D tensors of equal length into a 2-D tensor, one per row."""
    vs = [_as_tensor(v) for v in vectors]
    out = np.stack([v.data for v in vs])

    def backward(g):
        return tuple(g[i] for i in range(len(vs)))

    return _result(out, "stack_rows", vs, backward)


def dropout(a, p, rng):
    """Inverted dropout with keep-probability 1-p; identity when p == 0."""
    a = _as_tensor(a)
    if p == 0.0:
        return a
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout probability must be in [0, 1), got {p}")
    keep = (rng.random(a.shape) >= p).astype(a.dtype) / a.dtype.type(1.0 - p)
    out = a.data * keep

    def backward(g):
        return (g * keep,)

    return _result(out, "dropout", (a,), backward)


def computation_record(t):
    """Topologically ordered record of the operations producing `t`.

    Returns a list of tensors in which every input precedes its consumer;
    the final entry is `t` itself.
    """
    order = []
    visited = set()
    stack = [(t, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in visited:
            continue
        if expanded:
            visited.add(id(node))
            order.append(node)
        else:
            stack.append((node, True))
            for parent in node.inputs:
                if id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss):
    """Reverse-mode gradients of a scalar loss.

    Populates ``.grad`` on every tensor reachable from `loss` that has
    ``requires_grad``; grads of the visited subgraph are reset first, so each
    call yields the gradients of this loss alone.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = computation_record(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node.inputs, grads):
            if g is None or not parent.requires_grad:
                continue
            if parent.grad is None:
                parent.grad = np.array(g, dtype=parent.dtype, copy=True)
            else:
                parent.grad += g


def gradients(loss, params):
    """Gradient arrays of `loss` w.r.t. each parameter, in order.

    Parameters not on the computation path get an all-zero gradient.
    """
    for p in params:
        p.grad = None
    backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


def grad_check(f, inputs, step=1e-5):
    """Max relative error between analytic and central-difference gradients.

    `f` maps the given tensors to a scalar tensor. Every input with
    ``requires_grad`` is checked coordinate by coordinate:
    |analytic - central| / max(1, |central|), maximized over coordinates.
    Run under wide precision for meaningful thresholds.
    """
    if step <= 0:
        raise ContractError(f"grad_check step must be positive, got {step}")
    checked = [t for t in inputs if t.requires_grad]
    analytic = gradients(f(*inputs), checked)

    flags = [t.requires_grad for t in inputs]
    for t in inputs:
        t.requires_grad = False
    try:
        worst = 0.0
        for t, ga in zip(checked, analytic):
            flat = t.data.reshape(-1)
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + step
                hi = float(f(*inputs).data)
                flat[i] = saved - step
                lo = float(f(*inputs).data)
                flat[i] = saved
                fd = (hi - lo) / (2.0 * step)
                err = abs(float(ga.reshape(-1)[i]) - fd) / max(1.0, abs(fd))
                worst = max(worst, err)
    finally:
        for t, flag in zip(inputs, flags):
            t.requires_grad = flag
    return worst
