"""Truncated multivariate Taylor (jet) arithmetic at a point.

``JetScalar`` is a single truncated expansion; ``JetArray`` is a dense array
of jets sharing one ``(dim, order)`` and is the substrate for all tensor
field manipulation.  Coefficients are stored against the graded-lex
multi-index basis of :mod:`tractorlab.jets.basis`; the coefficient of
multi-index ``m`` is the partial derivative divided by ``m!``.

All values are immutable after construction and every operation is pure, so
jets can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy

from ..errors import OrderExceededError, SingularEvaluationError, SingularMetricError
from . import backend
from .basis import basis, basis_size, diff_table, index_of, mul_table, promote_table

_max_order = 8


def get_max_order() -> int:
    return _max_order


def set_max_order(order: int) -> None:
    """Raise or lower the supported truncation order (guards table sizes)."""
    global _max_order
    if order < 0:
        raise ValueError("order must be nonnegative")
    _max_order = order


def _check_order(order: int) -> None:
    if order < 0:
        raise OrderExceededError("jet order must be nonnegative")
    if order > _max_order:
        raise OrderExceededError(
            f"jet order {order} exceeds configured maximum {_max_order}"
        )


@dataclass(frozen=True)
class JetPoint:
    """Base point and truncation order for lifting expressions."""

    coords: tuple[float, ...]
    order: int

    def __post_init__(self):
        if not all(math.isfinite(c) for c in self.coords):
            raise ValueError("jet base point must have finite coordinates")
        _check_order(self.order)

    @property
    def dim(self) -> int:
        return len(self.coords)


class JetScalar:
    """One truncated Taylor expansion; supports ring arithmetic, division, exp."""

    __slots__ = ("dim", "order", "c")

    def __init__(self, dim: int, order: int, coeffs: np.ndarray):
        self.dim = dim
        self.order = order
        self.c = coeffs

    # -- constructors -------------------------------------------------
    @staticmethod
    def constant(dim: int, order: int, value: float) -> "JetScalar":
        _check_order(order)
        c = np.zeros(basis_size(dim, order))
        c[0] = value
        return JetScalar(dim, order, c)

    @staticmethod
    def coordinate(dim: int, order: int, var: int, base_value: float) -> "JetScalar":
        _check_order(order)
        c = np.zeros(basis_size(dim, order))
        c[0] = base_value
        if order >= 1:
            c[1 + var] = 1.0
        return JetScalar(dim, order, c)

    @staticmethod
    def from_coeffs(dim: int, order: int, coeffs: dict[tuple[int, ...], float]) -> "JetScalar":
        _check_order(order)
        idx = index_of(dim, order)
        c = np.zeros(basis_size(dim, order))
        for m, v in coeffs.items():
            c[idx[tuple(m)]] = v
        return JetScalar(dim, order, c)

    # -- views ---------------------------------------------------------
    @property
    def value(self) -> float:
        return float(self.c[0])

    @property
    def coeffs(self) -> dict[tuple[int, ...], float]:
        bas = basis(self.dim, self.order)
        return {m: float(v) for m, v in zip(bas, self.c) if v != 0.0}

    def coeff(self, m) -> float:
        return float(self.c[index_of(self.dim, self.order)[tuple(m)]])

    def truncate(self, order: int) -> "JetScalar":
        if order >= self.order:
            return self
        return JetScalar(self.dim, order, self.c[: basis_size(self.dim, order)])

    def array(self) -> "JetArray":
        return JetArray(self.dim, self.order, self.c.reshape(1, -1)[0].reshape(()))

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, JetScalar):
            if other.dim != self.dim:
                raise ValueError("jet dimension mismatch")
            return other
        return JetScalar.constant(self.dim, self.order, float(other))

    def __add__(self, other):
        other = self._coerce(other)
        k = min(self.order, other.order)
        return JetScalar(self.dim, k, self.truncate(k).c + other.truncate(k).c)

    __radd__ = __add__

    def __neg__(self):
        return JetScalar(self.dim, self.order, -self.c)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, JetScalar):
            return JetScalar(self.dim, self.order, self.c * float(other))
        if other.dim != self.dim:
            raise ValueError("jet dimension mismatch")
        k = min(self.order, other.order)
        table = mul_table(self.dim, k)
        out = np.zeros((1, table.nb))
        a = np.ascontiguousarray(self.truncate(k).c.reshape(1, -1))
        b = np.ascontiguousarray(other.truncate(k).c.reshape(1, -1))
        backend.mul_rows(a, b, out, table)
        return JetScalar(self.dim, k, out[0])

    __rmul__ = __mul__

    def reciprocal(self) -> "JetScalar":
        b0 = self.value
        if b0 == 0.0:
            raise SingularEvaluationError("division by jet with zero constant term")
        y = JetScalar.constant(self.dim, self.order, 1.0 / b0)
        iters = max(0, math.ceil(math.log2(self.order + 1))) if self.order else 0
        for _ in range(iters):
            y = y * (2.0 - self * y)
        return y

    def __truediv__(self, other):
        if not isinstance(other, JetScalar):
            return JetScalar(self.dim, self.order, self.c / float(other))
        return self * other._coerce_div()

    def _coerce_div(self):
        return self.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def __pow__(self, exponent: int):
        if not float(exponent).is_integer():
            raise ValueError("jet powers must have integer exponents")
        exponent = int(exponent)
        if exponent < 0:
            return self.reciprocal() ** (-exponent)
        result = JetScalar.constant(self.dim, self.order, 1.0)
        square = self
        e = exponent
        while e:
            if e & 1:
                result = result * square
            e >>= 1
            if e:
                square = square * square
        return result

    def exp(self) -> "JetScalar":
        u0 = self.value
        tilde = self - u0
        acc = JetScalar.constant(self.dim, self.order, 1.0)
        for i in range(self.order, 0, -1):
            acc = acc * tilde * (1.0 / i) + 1.0
        return acc * math.exp(u0)

    def derivative(self, var: int) -> "JetScalar":
        if self.order == 0:
            raise OrderExceededError("cannot differentiate an order-0 jet")
        src, dst, coef = diff_table(self.dim, self.order)[var]
        out = np.zeros(basis_size(self.dim, self.order - 1))
        out[dst] = coef * self.c[src]
        return JetScalar(self.dim, self.order - 1, out)

    def __repr__(self):
        return f"JetScalar(dim={self.dim}, order={self.order}, value={self.value:.6g})"


def extract_derivative(j: JetScalar, m) -> float:
    """Partial derivative of the lifted expression at the base point: m! * coeff."""
    m = tuple(m)
    if sum(m) > j.order:
        raise OrderExceededError(f"derivative order {sum(m)} exceeds jet order {j.order}")
    fact = 1.0
    for e in m:
        fact *= math.factorial(e)
    return fact * j.coeff(m)


# ---------------------------------------------------------------------------
# expression lifting
# ---------------------------------------------------------------------------

def lift(expr, point: JetPoint, coords) -> JetScalar:
    """Degree-``point.order`` Taylor expansion of a closed-form expression.

    ``expr`` is a sympy expression (or number) in the symbols ``coords``; it
    may use +, -, *, /, integer powers and ``exp``.
    """
    dim = point.dim
    order = point.order
    expr = sympy.sympify(expr)
    sym_index = {s: v for v, s in enumerate(coords)}

    def walk(e):
        if e.is_Number:
            return JetScalar.constant(dim, order, float(e))
        if e.is_Symbol:
            if e not in sym_index:
                raise ValueError(f"unknown symbol {e} in lifted expression")
            v = sym_index[e]
            return JetScalar.coordinate(dim, order, v, point.coords[v])
        if e.is_Add:
            acc = walk(e.args[0])
            for a in e.args[1:]:
                acc = acc + walk(a)
            return acc
        if e.is_Mul:
            acc = walk(e.args[0])
            for a in e.args[1:]:
                acc = acc * walk(a)
            return acc
        if e.is_Pow:
            base, expo = e.args
            if not (expo.is_Integer or (expo.is_Number and float(expo).is_integer())):
                raise ValueError(f"unsupported exponent {expo} in lifted expression")
            return walk(base) ** int(expo)
        if isinstance(e, sympy.exp):
            return walk(e.args[0]).exp()
        raise ValueError(f"unsupported expression node {type(e).__name__}: {e}")

    return walk(expr)


# ---------------------------------------------------------------------------
# dense arrays of jets
# ---------------------------------------------------------------------------

class JetArray:
    """Dense array of jets with shared ``(dim, order)``.

    ``values`` has shape ``(*shape, nbasis)``; linear operations act on the
    whole coefficient block at once and products route through the kernel
    backend.
    """

    __slots__ = ("dim", "order", "values")

    def __init__(self, dim: int, order: int, values: np.ndarray):
        self.dim = dim
        self.order = order
        self.values = values

    # -- constructors -------------------------------------------------
    @staticmethod
    def zeros(dim: int, order: int, shape: tuple[int, ...]) -> "JetArray":
        return JetArray(dim, order, np.zeros(shape + (basis_size(dim, order),)))

    @staticmethod
    def from_values(dim: int, order: int, values: np.ndarray) -> "JetArray":
        """Constant (x-independent) jets with the given point values."""
        out = JetArray.zeros(dim, order, np.shape(values))
        out.values[..., 0] = values
        return out

    @staticmethod
    def from_scalars(scalars) -> "JetArray":
        arr = np.asarray(scalars, dtype=object)
        flat = arr.reshape(-1)
        dim = flat[0].dim
        order = min(j.order for j in flat)
        out = np.empty((flat.size, basis_size(dim, order)))
        for i, j in enumerate(flat):
            out[i] = j.truncate(order).c
        return JetArray(dim, order, out.reshape(arr.shape + (-1,)))

    # -- views ----------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[:-1]

    @property
    def nb(self) -> int:
        return self.values.shape[-1]

    def value(self) -> np.ndarray:
        """Point values (constant coefficients)."""
        return np.array(self.values[..., 0])

    def jet(self, *index) -> JetScalar:
        return JetScalar(self.dim, self.order, np.array(self.values[index]))

    def truncate(self, order: int) -> "JetArray":
        if order >= self.order:
            return self
        if order < 0:
            raise OrderExceededError("cannot truncate below order 0")
        return JetArray(self.dim, order, self.values[..., : basis_size(self.dim, order)])

    def pad(self, order: int) -> "JetArray":
        """Zero-extend to a higher order.

        Only exact when the caller knows the missing coefficients cannot
        contribute, e.g. before multiplying by a monomial that shifts all
        degrees past the truncation.
        """
        if order <= self.order:
            return self.truncate(order)
        out = np.zeros(self.shape + (basis_size(self.dim, order),))
        out[..., : self.values.shape[-1]] = self.values
        return JetArray(self.dim, order, out)

    def copy(self) -> "JetArray":
        return JetArray(self.dim, self.order, self.values.copy())

    def __getitem__(self, key) -> "JetArray":
        return JetArray(self.dim, self.order, self.values[key])

    # -- linear operations ---------------------------------------------
    def _align(self, other: "JetArray"):
        if other.dim != self.dim:
            raise ValueError("jet dimension mismatch")
        k = min(self.order, other.order)
        return self.truncate(k), other.truncate(k), k

    def __add__(self, other):
        if isinstance(other, JetArray):
            a, b, k = self._align(other)
            return JetArray(self.dim, k, a.values + b.values)
        out = self.values.copy()
        out[..., 0] += other
        return JetArray(self.dim, self.order, out)

    __radd__ = __add__

    def __neg__(self):
        return JetArray(self.dim, self.order, -self.values)

    def __sub__(self, other):
        if isinstance(other, JetArray):
            a, b, k = self._align(other)
            return JetArray(self.dim, k, a.values - b.values)
        return self + (-other)

    def scale(self, factor: float) -> "JetArray":
        return JetArray(self.dim, self.order, self.values * factor)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        return jmul(self, other)

    __rmul__ = __mul__

    def moveaxis(self, src, dst) -> "JetArray":
        return JetArray(self.dim, self.order, np.moveaxis(self.values, src, dst))

    def swap(self, ax1: int, ax2: int) -> "JetArray":
        return JetArray(self.dim, self.order, np.swapaxes(self.values, ax1, ax2))

    def sym2(self, ax1: int, ax2: int) -> "JetArray":
        return JetArray(self.dim, self.order, 0.5 * (self.values + np.swapaxes(self.values, ax1, ax2)))

    def antisym2(self, ax1: int, ax2: int) -> "JetArray":
        return JetArray(self.dim, self.order, 0.5 * (self.values - np.swapaxes(self.values, ax1, ax2)))

    # -- differentiation -------------------------------------------------
    def deriv(self, var: int) -> "JetArray":
        if self.order == 0:
            raise OrderExceededError("cannot differentiate an order-0 jet array")
        src, dst, coef = diff_table(self.dim, self.order)[var]
        out = np.zeros(self.shape + (basis_size(self.dim, self.order - 1),))
        out[..., dst] = coef * self.values[..., src]
        return JetArray(self.dim, self.order - 1, out)

    def grad(self) -> "JetArray":
        """Stack all coordinate derivatives along a new leading axis."""
        if self.order == 0:
            raise OrderExceededError("cannot differentiate an order-0 jet array")
        nb1 = basis_size(self.dim, self.order - 1)
        out = np.zeros((self.dim,) + self.shape + (nb1,))
        for v in range(self.dim):
            src, dst, coef = diff_table(self.dim, self.order)[v]
            out[v][..., dst] = coef * self.values[..., src]
        return JetArray(self.dim, self.order - 1, out)

    # -- structural -------------------------------------------------------
    def promote(self, dim_to: int, offset: int) -> "JetArray":
        """Embed into a larger variable space (variables shifted by ``offset``)."""
        table = promote_table(self.dim, dim_to, offset, self.order)
        out = np.zeros(self.shape + (basis_size(dim_to, self.order),))
        out[..., table] = self.values
        return JetArray(dim_to, self.order, out)

    def __repr__(self):
        return f"JetArray(dim={self.dim}, order={self.order}, shape={self.shape})"


def jmul(a: JetArray, b: JetArray) -> JetArray:
    """Elementwise jet product with NumPy broadcasting over leading shapes."""
    if a.dim != b.dim:
        raise ValueError("jet dimension mismatch")
    k = min(a.order, b.order)
    a = a.truncate(k)
    b = b.truncate(k)
    table = mul_table(a.dim, k)
    shape = np.broadcast_shapes(a.shape, b.shape)
    av = np.broadcast_to(a.values, shape + (table.nb,))
    bv = np.broadcast_to(b.values, shape + (table.nb,))
    nrow = int(np.prod(shape, dtype=int)) if shape else 1
    out = np.zeros((nrow, table.nb))
    backend.mul_rows(
        np.ascontiguousarray(av.reshape(nrow, table.nb)),
        np.ascontiguousarray(bv.reshape(nrow, table.nb)),
        out,
        table,
    )
    return JetArray(a.dim, k, out.reshape(shape + (table.nb,)))


def jdot(a: JetArray, b: JetArray, axis_a: int, axis_b: int) -> JetArray:
    """Contract one axis pair: ``out[ra, rb] = sum_f a[..f..] * b[..f..]``.

    Output shape is (rest of a) + (rest of b).
    """
    if a.dim != b.dim:
        raise ValueError("jet dimension mismatch")
    k = min(a.order, b.order)
    a = a.truncate(k)
    b = b.truncate(k)
    table = mul_table(a.dim, k)
    av = np.moveaxis(a.values, axis_a, 0)
    bv = np.moveaxis(b.values, axis_b, 0)
    if av.shape[0] != bv.shape[0]:
        raise ValueError("contracted axes differ in length")
    f = av.shape[0]
    shape_a = av.shape[1:-1]
    shape_b = bv.shape[1:-1]
    ra = int(np.prod(shape_a, dtype=int)) if shape_a else 1
    rb = int(np.prod(shape_b, dtype=int)) if shape_b else 1
    swapped = ra > rb
    if swapped:
        av, bv = bv, av
        ra, rb = rb, ra
    av = np.ascontiguousarray(av.reshape(f, ra, table.nb))
    bv = np.ascontiguousarray(bv.reshape(f, rb, table.nb))
    out = np.zeros((ra, rb, table.nb))
    for fi in range(f):
        for pa in range(ra):
            backend.mul_rows_single(av[fi, pa], bv[fi], out[pa], table)
    if swapped:
        out = np.swapaxes(out, 0, 1)
    return JetArray(a.dim, k, out.reshape(shape_a + shape_b + (table.nb,)))


def jtrace(a: JetArray, ax1: int, ax2: int) -> JetArray:
    """Plain diagonal trace over two axes (no metric)."""
    return JetArray(a.dim, a.order, np.trace(a.values, axis1=ax1, axis2=ax2))


# ---------------------------------------------------------------------------
# jet linear algebra
# ---------------------------------------------------------------------------

def jet_matrix_inverse(m: JetArray) -> JetArray:
    """Inverse of a square matrix of jets; exact through the truncation order.

    Newton iteration ``Y <- Y(2I - MY)`` starting from the inverse of the
    constant term, which doubles the correct order each step.
    """
    d = m.shape[0]
    if m.shape != (d, d):
        raise ValueError("jet_matrix_inverse expects a square matrix of jets")
    m0 = m.value()
    try:
        inv0 = np.linalg.inv(m0)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("singular constant term in jet matrix") from exc
    if not np.all(np.isfinite(inv0)):
        raise SingularMetricError("non-finite inverse of constant term")
    y = JetArray.from_values(m.dim, m.order, inv0)
    eye2 = JetArray.from_values(m.dim, m.order, 2.0 * np.eye(d))
    iters = max(0, math.ceil(math.log2(m.order + 1))) if m.order else 0
    for _ in range(iters):
        y = jdot(y, eye2 - jdot(m, y, 1, 0), 1, 0)
    return y


def jet_linear_solve(a: JetArray, b: JetArray) -> JetArray:
    """Solve ``a @ x = b`` over the jet ring (``a`` square, constant term invertible)."""
    return jdot(jet_matrix_inverse(a), b, 1, 0)
