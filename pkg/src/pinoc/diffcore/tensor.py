"""Reverse-mode automatic differentiation over dense float64 arrays.

The computation graph is built define-by-run: every operation records its
parents and one vector-Jacobian closure per parent. ``Tensor.backward`` walks
the nodes once in reverse topological order and accumulates each adjoint
exactly once per consumer, so a node's ``grad`` is complete before its own
closures fire.

The differentiable primitive set is deliberately small: add, sub, mul, div,
matmul (and matvec through it), tanh, sin, cos, exp, square, sum, mean, the
convex gate (1-z)*u + z*v, plus structural ops (reshape, slice, stack, concat,
row-repeat) whose Jacobians are permutations. Everything else in the package
is composed from these.
"""

from __future__ import annotations

import numpy as np


class GraphError(Exception):
    """Malformed graph construction (shape mismatch, bad seed, cycle)."""


class NumericError(Exception):
    """Non-finite value encountered where finiteness is required."""


def _as_value(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """A node of the computation graph holding a float64 array."""

    __slots__ = ("value", "grad", "requires_grad", "parents", "vjps", "op")

    def __init__(self, value, requires_grad: bool = False, *, parents=(), vjps=(), op="leaf"):
        self.value = _as_value(value)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = parents
        self.vjps = vjps
        self.op = op

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    def item(self) -> float:
        return float(self.value)

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.value.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    # -- backward ----------------------------------------------------------------

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Accumulate adjoints of this node's value into ``grad`` of ancestors.

        Without a seed the node must be scalar (size 1). Adjoints of a previous
        backward pass are discarded: call ``clear_grads`` on reused leaves
        between passes if accumulation across passes is not wanted.
        """
        if seed is None:
            if self.value.size != 1:
                raise GraphError("backward() on a non-scalar requires an explicit seed")
            seed = np.ones_like(self.value)
        else:
            seed = _as_value(seed)
            if seed.shape != self.value.shape:
                raise GraphError("seed shape does not match node shape")
        order = _toposort(self)
        for node in order:
            node.grad = None
        self.grad = seed
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                if not parent.requires_grad or vjp is None:
                    continue
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    # never mutate in place: the first contribution may alias g
                    parent.grad = parent.grad + contrib


def _toposort(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS over the requires_grad subgraph."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def param(value) -> Tensor:
    """A trainable leaf."""
    return Tensor(value, requires_grad=True)


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def clear_grads(tensors) -> None:
    for t in tensors:
        t.grad = None


# -- broadcasting helper ----------------------------------------------------------


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to `shape` (reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, out, vjp_a, vjp_b, op):
    need_a = a.requires_grad
    need_b = b.requires_grad
    return Tensor(
        out,
        requires_grad=need_a or need_b,
        parents=(a, b),
        vjps=(vjp_a if need_a else None, vjp_b if need_b else None),
        op=op,
    )


# -- arithmetic primitives -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value + b.value
    sa, sb = a.value.shape, b.value.shape
    return _binary(a, b, out, lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(g, sb), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value - b.value
    sa, sb = a.value.shape, b.value.shape
    return _binary(a, b, out, lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(g, sb), "sub")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor(-a.value, a.requires_grad, parents=(a,), vjps=(lambda g: -g,), op="neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value * b.value
    sa, sb = a.value.shape, b.value.shape
    av, bv = a.value, b.value
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g * bv, sa),
        lambda g: _unbroadcast(g * av, sb),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.value / b.value
    sa, sb = a.value.shape, b.value.shape
    av, bv = a.value, b.value
    return _binary(
        a, b, out,
        lambda g: _unbroadcast(g / bv, sa),
        lambda g: _unbroadcast(-g * av / (bv * bv), sb),
        "div",
    )


def matmul(a, b) -> Tensor:
    """2-D matrix product; matvec is (1,n) @ (n,k) or via `matvec`."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise GraphError("matmul expects 2-D operands")
    if a.value.shape[1] != b.value.shape[0]:
        raise GraphError(f"matmul shape mismatch {a.value.shape} @ {b.value.shape}")
    out = a.value @ b.value
    av, bv = a.value, b.value
    return _binary(a, b, out, lambda g: g @ bv.T, lambda g: av.T @ g, "matmul")


def matvec(m, v) -> Tensor:
    """Matrix (r,c) times vector (c,) -> (r,)."""
    m, v = as_tensor(m), as_tensor(v)
    if m.value.ndim != 2 or v.value.ndim != 1:
        raise GraphError("matvec expects a 2-D matrix and a 1-D vector")
    out = matmul(m, reshape(v, (v.value.shape[0], 1)))
    return reshape(out, (m.value.shape[0],))


def gate(z, u, v) -> Tensor:
    """Convex combination (1 - z) * u + z * v as one primitive."""
    z, u, v = as_tensor(z), as_tensor(u), as_tensor(v)
    zv, uv, vv = z.value, u.value, v.value
    out = uv + zv * (vv - uv)
    need = z.requires_grad or u.requires_grad or v.requires_grad
    sz, su, sv = zv.shape, uv.shape, vv.shape
    return Tensor(
        out,
        requires_grad=need,
        parents=(z, u, v),
        vjps=(
            (lambda g: _unbroadcast(g * (vv - uv), sz)) if z.requires_grad else None,
            (lambda g: _unbroadcast(g * (1.0 - zv), su)) if u.requires_grad else None,
            (lambda g: _unbroadcast(g * zv, sv)) if v.requires_grad else None,
        ),
        op="gate",
    )


# -- nonlinearities ---------------------------------------------------------------------


def _unary(a, out, vjp, op):
    return Tensor(out, a.requires_grad, parents=(a,), vjps=(vjp,), op=op)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.value)
    return _unary(a, y, lambda g: g * (1.0 - y * y), "tanh")


def sin(a) -> Tensor:
    a = as_tensor(a)
    c = np.cos(a.value)
    return _unary(a, np.sin(a.value), lambda g: g * c, "sin")


def cos(a) -> Tensor:
    a = as_tensor(a)
    s = np.sin(a.value)
    return _unary(a, np.cos(a.value), lambda g: -g * s, "cos")


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.value)
    return _unary(a, y, lambda g: g * y, "exp")


def square(a) -> Tensor:
    a = as_tensor(a)
    av = a.value
    return _unary(a, av * av, lambda g: 2.0 * g * av, "square")


# -- reductions ---------------------------------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.value.sum(axis=axis, keepdims=keepdims)
    shape = a.value.shape

    def vjp(g):
        if axis is None:
            return np.full(shape, g)
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, shape).copy()

    return _unary(a, out, vjp, "sum")


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.value.size if axis is None else a.value.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


# -- structural ops (permutation Jacobians) ------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.value.shape
    return _unary(a, a.value.reshape(shape), lambda g: g.reshape(old), "reshape")


def take(a, idx) -> Tensor:
    """Basic slicing/int indexing; adjoint scatters back with np.add.at."""
    a = as_tensor(a)
    out = a.value[idx]
    shape = a.value.shape

    def vjp(g):
        buf = np.zeros(shape)
        np.add.at(buf, idx, g)
        return buf

    return _unary(a, out, vjp, "take")


def repeat_rows(a, k: int) -> Tensor:
    """Repeat each row k times along axis 0 (sample -> per-point expansion)."""
    a = as_tensor(a)
    if k < 1:
        raise GraphError("repeat count must be >= 1")
    out = np.repeat(a.value, k, axis=0)
    n = a.value.shape[0]
    rest = a.value.shape[1:]

    def vjp(g):
        return g.reshape((n, k) + rest).sum(axis=1)

    return _unary(a, out, vjp, "repeat_rows")


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.value for t in tensors], axis=axis)
    need = any(t.requires_grad for t in tensors)

    def make_vjp(i):
        return lambda g: np.take(g, i, axis=axis)

    return Tensor(
        out,
        requires_grad=need,
        parents=tuple(tensors),
        vjps=tuple(make_vjp(i) if t.requires_grad else None for i, t in enumerate(tensors)),
        op="stack",
    )


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.value for t in tensors], axis=axis)
    need = any(t.requires_grad for t in tensors)
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]

        def vjp(g):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            return g[tuple(sl)]

        return vjp

    return Tensor(
        out,
        requires_grad=need,
        parents=tuple(tensors),
        vjps=tuple(make_vjp(i) if t.requires_grad else None for i, t in enumerate(tensors)),
        op="concat",
    )


# -- gradient extraction ------------------------------------------------------------------------


def grad_params(loss: Tensor, params) -> np.ndarray:
    """Flat d(loss)/d(params); parameters off the graph contribute zeros."""
    params = list(params)
    if not np.isfinite(loss.value).all():
        raise NumericError("loss is not finite")
    loss.backward()
    parts = []
    for p in params:
        if p.grad is None:
            parts.append(np.zeros(p.value.size))
        else:
            parts.append(np.asarray(p.grad, dtype=np.float64).reshape(-1))
    return np.concatenate(parts) if parts else np.zeros(0)


def per_point_grad_norm_sq(rows: Tensor, params) -> float:
    """Sum over rows j of the squared parameter-gradient norm of rows[j].

    Requires the graph below ``rows`` to be row-parallel (each output row
    depends on its own row of every intermediate), with parameters entering
    only through matmul right operands and broadcast bias adds. Under that
    structure one reverse sweep seeded with ones yields, at every node, the
    per-row backprop signal of that row's output, and the per-row Frobenius
    norms factor into Gram products of activations and signals:

        sum_j ||d r_j / dW||^2 = sum_{c,d} sum_j (x_c.x_d)_j (g_c.g_d)_j

    where c, d range over the (few) matmul sites sharing W.
    """
    params = set(id(p) for p in params)
    if rows.value.ndim > 2 or rows.value.ndim == 0:
        raise GraphError("per-point probe expects a 1-D or (B,1) row vector of residuals")
    order = _toposort(rows)
    for node in order:
        node.grad = None
    rows.grad = np.ones_like(rows.value)
    weight_pairs: dict[int, list[tuple[np.ndarray, np.ndarray]]] = {}
    bias_rows: dict[int, np.ndarray] = {}
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for i, (parent, vjp) in enumerate(zip(node.parents, node.vjps)):
            if not parent.requires_grad or vjp is None:
                continue
            if id(parent) in params:
                if node.op == "matmul" and i == 1:
                    x = node.parents[0].value
                    weight_pairs.setdefault(id(parent), []).append((x, g))
                    continue
                if node.op in ("add", "sub") and parent.value.ndim <= 1:
                    sgn = -1.0 if (node.op == "sub" and i == 1) else 1.0
                    rows_g = sgn * g.reshape(g.shape[0], -1)
                    key = id(parent)
                    bias_rows[key] = rows_g if key not in bias_rows else bias_rows[key] + rows_g
                    continue
                raise GraphError(f"probe cannot handle parameter used in op '{node.op}'")
            contrib = vjp(g)
            if parent.grad is None:
                parent.grad = contrib
            else:
                parent.grad = parent.grad + contrib
    total = 0.0
    for pairs in weight_pairs.values():
        for xi, gi in pairs:
            for xj, gj in pairs:
                total += float(np.sum(np.einsum("bi,bi->b", xi, xj) * np.einsum("bo,bo->b", gi, gj)))
    for rows_g in bias_rows.values():
        total += float(np.sum(rows_g * rows_g))
    return total
