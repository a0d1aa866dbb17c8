import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from oracles import partial_fd, poly1d_reciprocal
from tractorlab.errors import OrderExceededError, SingularEvaluationError, SingularMetricError
from tractorlab.jets import (
    JetArray,
    JetPoint,
    JetScalar,
    basis,
    basis_size,
    extract_derivative,
    jdot,
    jet_matrix_inverse,
    jmul,
    lift,
)
from tractorlab.jets import _kern_py
from tractorlab.jets.basis import mul_table

X = sympy.symbols("x1:4")


def _expr_fn(expr, coords):
    f = sympy.lambdify(coords, expr, "numpy")
    return lambda x: float(f(*x))


# ---------------------------------------------------------------------------
# lift
# ---------------------------------------------------------------------------

def test_lift_coordinate_function():
    j = lift(X[0], JetPoint((0.0, 0.0, 0.0), 2), X)
    assert j.coeffs == {(1, 0, 0): 1.0}


def test_lift_square_away_from_origin():
    j = lift(X[0] ** 2, JetPoint((3.0, 0.0, 0.0), 2), X)
    assert j.coeff((0, 0, 0)) == 9.0
    assert j.coeff((1, 0, 0)) == 6.0
    assert j.coeff((2, 0, 0)) == 1.0


def test_lift_rational_against_finite_differences():
    # oracle: central differences with Richardson at step 1e-3
    expr = 1 / (1 + X[0] ** 2)
    p = JetPoint((0.0, 0.0, 0.0), 4)
    j = lift(expr, p, X)
    f = _expr_fn(expr, X)
    for m in [(0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0), (4, 0, 0)]:
        # step/extrapolation widened with the order: nested differences at
        # 1e-3 lose ~eps/h^4 to roundoff for 4th derivatives
        h, levels = {0: (1e-3, 1), 1: (1e-3, 1), 2: (1e-3, 1), 3: (2e-2, 2), 4: (1e-1, 3)}[sum(m)]
        want = partial_fd(f, p.coords, m, h=h, levels=levels)
        fact = np.prod([math.factorial(e) for e in m])
        assert j.coeff(m) * fact == pytest.approx(want, abs=1e-8)
    # frozen values of the even Taylor series 1 - x^2 + x^4
    assert j.coeff((0, 0, 0)) == pytest.approx(1.0, abs=1e-12)
    assert j.coeff((2, 0, 0)) == pytest.approx(-1.0, abs=1e-12)
    assert j.coeff((4, 0, 0)) == pytest.approx(1.0, abs=1e-12)


def test_lift_exp_and_division_compose():
    expr = sympy.exp(2 * X[1]) / (3 + X[0])
    p = JetPoint((1.0, 0.5, 0.0), 3)
    j = lift(expr, p, X)
    f = _expr_fn(expr, X)
    for m in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 1, 0), (0, 2, 0)]:
        want = partial_fd(f, p.coords, m, h=1e-3)
        assert extract_derivative(j, m) == pytest.approx(want, rel=1e-7)


def test_lift_commutes_with_products():
    a = (1 + X[0] + 2 * X[1]) ** 2
    b = X[2] ** 3 - X[0] * X[1]
    p = JetPoint((0.3, -0.2, 0.7), 4)
    left = lift(a * b, p, X)
    right = lift(a, p, X) * lift(b, p, X)
    assert_allclose(left.c, right.c, atol=1e-13)


def test_lift_division_by_zero_constant_raises():
    with pytest.raises(SingularEvaluationError):
        lift(1 / X[0], JetPoint((0.0, 0.0, 0.0), 2), X)


# ---------------------------------------------------------------------------
# extract_derivative
# ---------------------------------------------------------------------------

def test_extract_derivative_cubic():
    j = lift(X[0] ** 3, JetPoint((0.0, 0.0, 0.0), 3), X)
    assert extract_derivative(j, (3, 0, 0)) == pytest.approx(6.0)
    assert extract_derivative(j, (0, 0, 0)) == pytest.approx(0.0)


def test_extract_derivative_order_zero_is_value():
    j = lift(5 + X[1], JetPoint((1.0, 2.0, 3.0), 2), X)
    assert extract_derivative(j, (0, 0, 0)) == pytest.approx(7.0)


def test_extract_derivative_beyond_order_raises():
    j = lift(X[0], JetPoint((0.0, 0.0, 0.0), 2), X)
    with pytest.raises(OrderExceededError):
        extract_derivative(j, (3, 0, 0))


def test_extract_derivative_matches_fd_on_random_polynomial(rng):
    coords = X
    terms = []
    for _ in range(8):
        mono = sympy.Integer(1)
        for s in coords:
            mono *= s ** int(rng.integers(0, 3))
        terms.append(float(rng.uniform(-1, 1)) * mono)
    expr = sum(terms)
    p = JetPoint((0.4, -0.3, 0.2), 4)
    j = lift(expr, p, coords)
    f = _expr_fn(expr, coords)
    for m in [(1, 0, 0), (0, 2, 0), (1, 1, 1), (2, 1, 0)]:
        want = partial_fd(f, p.coords, m, h=1e-3)
        got = extract_derivative(j, m)
        assert got == pytest.approx(want, rel=1e-6, abs=1e-6)


# ---------------------------------------------------------------------------
# ring axioms (exact on small-integer coefficients)
# ---------------------------------------------------------------------------

def _int_jet(draw_ints, dim, order):
    nb = basis_size(dim, order)
    return JetScalar(dim, order, np.array(draw_ints(nb), dtype=float))


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_ring_axioms_exact(data):
    dim, order = 3, 3
    nb = basis_size(dim, order)
    ints = st.lists(st.integers(-5, 5), min_size=nb, max_size=nb)
    a = _int_jet(lambda n: data.draw(ints), dim, order)
    b = _int_jet(lambda n: data.draw(ints), dim, order)
    c = _int_jet(lambda n: data.draw(ints), dim, order)
    assert np.array_equal(((a + b) + c).c, (a + (b + c)).c)
    assert np.array_equal((a * b).c, (b * a).c)
    assert np.array_equal(((a * b) * c).c, (a * (b * c)).c)
    assert np.array_equal((a * (b + c)).c, (a * b + a * c).c)
    assert np.array_equal((a + (-1.0) * a).c, np.zeros(nb))


def test_reciprocal_matches_series_oracle():
    # long-division oracle for 1/(2 + u - u^2) in one variable
    order = 6
    from tractorlab.jets import set_max_order, get_max_order

    b = JetScalar.from_coeffs(1, order, {(0,): 2.0, (1,): 1.0, (2,): -1.0})
    want = poly1d_reciprocal([2.0, 1.0, -1.0], order)
    assert_allclose(b.reciprocal().c, want, atol=1e-14)


# ---------------------------------------------------------------------------
# jet matrix inverse
# ---------------------------------------------------------------------------

def test_matrix_inverse_identity():
    p = JetPoint((0.0, 0.0, 0.0), 3)
    eye = JetArray.from_values(3, 3, np.eye(4))
    inv = jet_matrix_inverse(eye)
    assert_allclose(inv.values, eye.values, atol=1e-14)


def test_matrix_inverse_diagonal_series():
    p = JetPoint((0.0, 0.0, 0.0), 2)
    m = JetArray.from_scalars(
        [
            [lift(1 + X[0] ** 2, p, X), lift(0, p, X)],
            [lift(0, p, X), lift(1, p, X)],
        ]
    )
    inv = jet_matrix_inverse(m)
    top = inv.jet(0, 0)
    assert top.coeff((0, 0, 0)) == pytest.approx(1.0)
    assert top.coeff((2, 0, 0)) == pytest.approx(-1.0)


def test_matrix_inverse_defining_property_random(rng):
    dim, order, d = 3, 4, 5
    nb = basis_size(dim, order)
    vals = rng.uniform(-0.3, 0.3, size=(d, d, nb))
    vals[..., 0] += np.eye(d) * 2.0
    m = JetArray(dim, order, vals)
    inv = jet_matrix_inverse(m)
    prod = jdot(m, inv, 1, 0)
    want = np.zeros_like(prod.values)
    want[..., 0] = np.eye(d)
    assert_allclose(prod.values, want, atol=1e-11)


def test_matrix_inverse_singular_raises():
    m = JetArray.from_values(2, 2, np.zeros((2, 2)))
    with pytest.raises(SingularMetricError):
        jet_matrix_inverse(m)


# ---------------------------------------------------------------------------
# array plumbing
# ---------------------------------------------------------------------------

def test_basis_truncation_is_prefix():
    b5 = basis(4, 5)
    b3 = basis(4, 3)
    assert b5[: len(b3)] == b3


def test_jmul_matches_scalar_products(rng):
    dim, order = 2, 3
    nb = basis_size(dim, order)
    a = JetArray(dim, order, rng.standard_normal((2, 3, nb)))
    b = JetArray(dim, order, rng.standard_normal((2, 3, nb)))
    prod = jmul(a, b)
    for i in range(2):
        for j in range(3):
            want = a.jet(i, j) * b.jet(i, j)
            assert_allclose(prod.values[i, j], want.c, atol=1e-13)


def test_jdot_matches_loop_contraction(rng):
    dim, order = 2, 2
    nb = basis_size(dim, order)
    a = JetArray(dim, order, rng.standard_normal((4, 3, nb)))
    b = JetArray(dim, order, rng.standard_normal((4, 5, nb)))
    out = jdot(a, b, 0, 0)
    for i in range(3):
        for j in range(5):
            acc = JetScalar.constant(dim, order, 0.0)
            for f in range(4):
                acc = acc + a.jet(f, i) * b.jet(f, j)
            assert_allclose(out.values[i, j], acc.c, atol=1e-13)


def test_derivative_matches_sympy(rng):
    expr = (1 + X[0] * X[1] - X[2] ** 2) ** 2
    p = JetPoint((0.2, 0.5, -0.1), 4)
    j = lift(expr, p, X)
    dj = j.derivative(1)
    want = lift(sympy.diff(expr, X[1]), JetPoint(p.coords, 3), X)
    assert_allclose(dj.c, want.c, atol=1e-12)


def test_promote_embeds_variables():
    p = JetPoint((0.3, 0.7), 3)
    xs = sympy.symbols("x1 x2")
    j = lift(xs[0] ** 2 + xs[1], p, xs)
    arr = JetArray(2, 3, j.c.reshape(1, -1))
    promoted = arr.promote(4, 1)
    ys = sympy.symbols("t x1 x2 r")
    want = lift(ys[1] ** 2 + ys[2], JetPoint((9.9, 0.3, 0.7, 9.9), 3), ys)
    assert_allclose(promoted.values[0], want.c, atol=1e-12)


def test_python_kernel_matches_selected_backend(rng):
    dim, order = 3, 4
    table = mul_table(dim, order)
    nrow = 7
    a = rng.standard_normal((nrow, table.nb))
    b = rng.standard_normal((nrow, table.nb))
    out_py = np.zeros_like(a)
    _kern_py.mul_rows(a, b, out_py, table.ii, table.jj, table.kk, table.starts, table.targets)
    ja = JetArray(dim, order, a)
    jb = JetArray(dim, order, b)
    assert_allclose(jmul(ja, jb).values, out_py, atol=1e-13)
    out_single = np.zeros_like(a)
    _kern_py.mul_rows_single(a[0], b, out_single, table.ii, table.jj, table.kk, table.starts, table.targets)
    for r in range(nrow):
        want = JetScalar(dim, order, a[0]) * JetScalar(dim, order, b[r])
        assert_allclose(out_single[r], want.c, atol=1e-13)
