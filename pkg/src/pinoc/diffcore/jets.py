"""Forward-mode second-order jets.

Two realizations of the same Taylor arithmetic live here:

* ``Jet2`` — a scalar (value, d1, d2) triple along one direction, used for
  closed-form fields and as the public return type of ``jet_eval``.
* ``CoordJets`` — batched jets whose components are graph ``Tensor``s, one
  first/second derivative pair per requested coordinate axis. Because the
  components are graph nodes, a reverse sweep over a loss built from them
  yields parameter gradients of derivative-containing residuals.

Structural zeros are carried as ``None`` components so constant inputs (for
example branch-side activations before the first gate) cost nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor import GraphError, NumericError, Tensor
from . import tensor as T


# -- scalar jets --------------------------------------------------------------


@dataclass
class Jet2:
    """Second-order Taylor triple f, f', f'' along one direction."""

    value: float
    d1: float = 0.0
    d2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.value) and math.isfinite(self.d1) and math.isfinite(self.d2)):
            raise NumericError(f"non-finite jet ({self.value}, {self.d1}, {self.d2})")

    @staticmethod
    def _lift(x) -> "Jet2":
        if isinstance(x, Jet2):
            return x
        if isinstance(x, (int, float)):
            return Jet2(float(x))
        raise GraphError(f"unsupported operand in jet arithmetic: {type(x).__name__}")

    def __add__(self, o):
        o = Jet2._lift(o)
        return Jet2(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __sub__(self, o):
        o = Jet2._lift(o)
        return Jet2(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2)

    def __rsub__(self, o):
        return Jet2._lift(o).__sub__(self)

    def __neg__(self):
        return Jet2(-self.value, -self.d1, -self.d2)

    def __mul__(self, o):
        o = Jet2._lift(o)
        return Jet2(
            self.value * o.value,
            self.d1 * o.value + self.value * o.d1,
            self.d2 * o.value + 2.0 * self.d1 * o.d1 + self.value * o.d2,
        )

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = Jet2._lift(o)
        if o.value == 0.0:
            raise NumericError("jet division by zero value part")
        w = self.value / o.value
        d1 = (self.d1 - w * o.d1) / o.value
        d2 = (self.d2 - 2.0 * d1 * o.d1 - w * o.d2) / o.value
        return Jet2(w, d1, d2)

    def __rtruediv__(self, o):
        return Jet2._lift(o).__truediv__(self)


def _chain(x: Jet2, f, df, d2f) -> Jet2:
    v = f(x.value)
    return Jet2(v, df * x.d1, df * x.d2 + d2f * x.d1 * x.d1)


def jtanh(x) -> Jet2:
    x = Jet2._lift(x)
    v = math.tanh(x.value)
    s = 1.0 - v * v
    return _chain(x, lambda _: v, s, -2.0 * v * s)


def jsin(x) -> Jet2:
    x = Jet2._lift(x)
    return _chain(x, math.sin, math.cos(x.value), -math.sin(x.value))


def jcos(x) -> Jet2:
    x = Jet2._lift(x)
    return _chain(x, math.cos, -math.sin(x.value), -math.cos(x.value))


def jexp(x) -> Jet2:
    x = Jet2._lift(x)
    e = math.exp(x.value)
    return _chain(x, lambda _: e, e, e)


def jsquare(x) -> Jet2:
    x = Jet2._lift(x)
    return x * x


def jet_eval(f, x, direction: int) -> Jet2:
    """Evaluate f with a unit second-order jet seeded on one coordinate.

    ``f`` maps a list of Jet2 (one per coordinate of ``x``) to a Jet2 (plain
    numbers are lifted). Returns exact f(x), df/dx_dir, d2f/dx_dir2 for any
    composition of the supported primitives.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not np.isfinite(xs).all():
        raise NumericError("non-finite evaluation point")
    if not 0 <= direction < xs.size:
        raise GraphError(f"direction {direction} out of range for {xs.size} coordinates")
    args = [Jet2(float(v), 1.0 if i == direction else 0.0, 0.0) for i, v in enumerate(xs)]
    out = f(args if xs.size > 1 else args[0])
    return Jet2._lift(out)


# -- batched jets over Tensors ----------------------------------------------


class CoordJets:
    """Batched value plus (d1, d2) Tensors per differentiated coordinate axis.

    ``orders[i]`` is 1 or 2; for order-1 axes the d2 slot stays ``None`` and
    no second-order terms are ever formed. A ``None`` d1/d2 on an order-2 axis
    means the component is structurally zero so far.
    """

    __slots__ = ("val", "d1", "d2", "orders")

    def __init__(self, val: Tensor, d1: list, d2: list, orders: tuple[int, ...]):
        self.val = val
        self.d1 = list(d1)
        self.d2 = list(d2)
        self.orders = tuple(orders)

    @property
    def ndirs(self) -> int:
        return len(self.d1)


def lift_coords(y: Tensor, dirs: tuple[int, ...], orders: tuple[int, ...]) -> CoordJets:
    """Seed unit jets on the requested columns of a (B, dim) coordinate block."""
    if len(dirs) != len(orders) or any(o not in (1, 2) for o in orders):
        raise GraphError("each differentiated axis needs an order of 1 or 2")
    n, dim = y.value.shape
    d1 = []
    for ax in dirs:
        e = np.zeros((n, dim))
        e[:, ax] = 1.0
        d1.append(Tensor(e))
    return CoordJets(y, d1, [None] * len(dirs), orders)


def lift_const(x: Tensor, like: "CoordJets | int", orders: tuple[int, ...] | None = None) -> CoordJets:
    """A quantity independent of the differentiated coordinates."""
    if isinstance(like, CoordJets):
        n = like.ndirs
        orders = like.orders
    else:
        n = like
        orders = orders if orders is not None else (2,) * n
    return CoordJets(x, [None] * n, [None] * n, orders)


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _sub(a, b):
    if a is None:
        return None if b is None else -b
    return a - b if b is not None else a


def _smul(a, b):
    return None if (a is None or b is None) else a * b


def jets_add(x: CoordJets, y: CoordJets) -> CoordJets:
    return CoordJets(
        x.val + y.val,
        [_add(a, b) for a, b in zip(x.d1, y.d1)],
        [_add(a, b) for a, b in zip(x.d2, y.d2)],
        x.orders,
    )


def jets_sub(x: CoordJets, y: CoordJets) -> CoordJets:
    return CoordJets(
        x.val - y.val,
        [_sub(a, b) for a, b in zip(x.d1, y.d1)],
        [_sub(a, b) for a, b in zip(x.d2, y.d2)],
        x.orders,
    )


def jets_mul(x: CoordJets, y: CoordJets) -> CoordJets:
    """Leibniz to second order per direction."""
    d1 = []
    d2 = []
    for i in range(x.ndirs):
        d1.append(_add(_smul(x.d1[i], y.val), _smul(x.val, y.d1[i])))
        if x.orders[i] < 2:
            d2.append(None)
            continue
        cross = _smul(x.d1[i], y.d1[i])
        term = _add(_smul(x.d2[i], y.val), _smul(x.val, y.d2[i]))
        d2.append(_add(term, None if cross is None else 2.0 * cross))
    return CoordJets(x.val * y.val, d1, d2, x.orders)


def jets_affine(x: CoordJets, w: Tensor, b: Tensor | None) -> CoordJets:
    """x @ w (+ b on the value only); derivative components map linearly."""
    val = T.matmul(x.val, w)
    if b is not None:
        val = val + b
    d1 = [None if c is None else T.matmul(c, w) for c in x.d1]
    d2 = [None if c is None else T.matmul(c, w) for c in x.d2]
    return CoordJets(val, d1, d2, x.orders)


def jets_tanh(x: CoordJets) -> CoordJets:
    y = T.tanh(x.val)
    any_d = any(c is not None for c in x.d1) or any(c is not None for c in x.d2)
    if not any_d:
        return CoordJets(y, list(x.d1), list(x.d2), x.orders)
    s = 1.0 - T.square(y)
    ys = None
    d1 = []
    d2 = []
    for i, (c1, c2) in enumerate(zip(x.d1, x.d2)):
        d1.append(None if c1 is None else s * c1)
        if x.orders[i] < 2:
            d2.append(None)
            continue
        parts = None
        if c2 is not None:
            parts = s * c2
        if c1 is not None:
            if ys is None:
                ys = y * s
            parts = _add(parts, -2.0 * ys * T.square(c1))
        d2.append(parts)
    return CoordJets(y, d1, d2, x.orders)


def jets_gate(z: CoordJets, u: CoordJets, v: CoordJets) -> CoordJets:
    """(1 - z) * u + z * v, i.e. u + z * (v - u), to second order."""
    w = jets_sub(v, u)
    any_dz = any(c is not None for c in z.d1) or any(c is not None for c in z.d2)
    any_dw = any(c is not None for c in w.d1) or any(c is not None for c in w.d2)
    if not (any_dz or any_dw):
        return CoordJets(T.gate(z.val, u.val, v.val), list(u.d1), list(u.d2), u.orders)
    m = jets_mul(z, w)
    return jets_add(u, m)


def jets_scale(x: CoordJets, c: float) -> CoordJets:
    return CoordJets(
        c * x.val,
        [None if t is None else c * t for t in x.d1],
        [None if t is None else c * t for t in x.d2],
        x.orders,
    )


def jets_chunk_dot(hu: CoordJets, hy: CoordJets, n_out: int) -> CoordJets:
    """Per-chunk latent dot product: (B, q) x (B, q) -> (B, n_out)."""
    q = hu.val.value.shape[1]
    if q % n_out != 0:
        raise GraphError(f"latent width {q} not divisible by {n_out} outputs")
    B = hu.val.value.shape[0]
    chunk = q // n_out
    prod = jets_mul(hu, hy)

    def reduce(t):
        if t is None:
            return None
        return T.tsum(T.reshape(t, (B, n_out, chunk)), axis=2)

    return CoordJets(
        reduce(prod.val), [reduce(t) for t in prod.d1], [reduce(t) for t in prod.d2], hu.orders
    )
