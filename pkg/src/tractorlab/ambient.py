"""Normal-form ambient metrics over a conformal base, and the operators on them.

Ambient coordinates are ``(t, x^1..x^n, rho)`` (indices ``0``, ``1..n``,
``n+1``) and the chart metric is

    h = 2 rho dt (x) dt + t (dt (x) drho + drho (x) dt) + t^2 g_rho,
    g_rho = g + rho g1 + rho^2 g2 (+ rho^3 g3),

with the dilation field X = t d_t.  For this chart X's dual one-form is
exactly d(rho t^2), so the defining function is r = rho t^2 and Q is the
hypersurface rho = 0.  Expansion coefficients default to the closed forms

    g1 = 2 P,
    g2 = P.P - B / (n - 4),

derived by forcing the tangential Ricci curvature of h to vanish through
first order in rho; both are cross-checked (and g3 is produced) by the
evaluation-based pointwise solver ``solve_expansion``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, replace

import numpy as np

from .curvature import ChartMetric, CurvatureEngine, JetField, psi_quadratic
from .errors import (
    CriticalDimensionError,
    DimensionError,
    HypothesisViolatedError,
    SingularEvaluationError,
)
from .jets import JetArray, JetScalar, basis, basis_size, index_of, jdot, jet_linear_solve, jmul, jtrace
from .tensor import DOWN, UP


@dataclass(frozen=True)
class QPoint:
    """Point on the zero locus of the defining function: coordinates (t, x, 0)."""

    t: float
    x: tuple[float, ...]

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("QPoint needs t > 0")

    def coords(self) -> tuple[float, ...]:
        return (self.t, *self.x, 0.0)

    @property
    def n(self) -> int:
        return len(self.x)


def _as_point(chart: "AmbientChart", point) -> tuple[float, ...]:
    if isinstance(point, QPoint):
        return point.coords()
    point = tuple(float(c) for c in point)
    if len(point) != chart.dim:
        raise ValueError(f"expected {chart.dim} ambient coordinates")
    return point


@dataclass(eq=False)
class AmbientChart:
    """Normal-form ambient metric over a base chart metric."""

    base: ChartMetric
    expansion_order: int = 2
    g1_mode: str = "schouten"  # "schouten" | "zero"
    g2_mode: str = "closed"  # "closed" | "solved" | "zero"
    perturbation: tuple | None = None  # ("break_dalpha"|"preserve", eps, covector/matrix)
    label: str = ""
    extra_coefficient: tuple[int, np.ndarray] | None = None  # internal: (m, const tensor)

    def __post_init__(self):
        if self.base.dim < 3:
            raise DimensionError("ambient construction needs base dim >= 3")
        if self.expansion_order not in (0, 1, 2, 3):
            raise ValueError("expansion_order must be 0..3")
        if self.expansion_order >= 2 and self.base.dim == 4 and self.g2_mode == "closed":
            raise CriticalDimensionError("closed-form second coefficient degenerates for n = 4")
        self._engines: dict = {}
        self._solved: dict = {}
        self._lock = threading.Lock()
        if not self.label:
            self.label = f"ambient({self.base.label})"

    # -- dimensions -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.base.dim

    @property
    def dim(self) -> int:
        return self.base.dim + 2

    # -- expansion coefficients ------------------------------------------
    def coefficient_jets(self, x0, order: int, m: int) -> JetArray:
        """Jets (base variables) of the m-th expansion coefficient at x0."""
        n = self.n
        if m == 1:
            if self.g1_mode == "zero":
                return JetArray.zeros(n, order, (n, n))
            eng = self.base.engine(x0, order + 2)
            return eng.schouten.truncate(order).scale(2.0)
        if m == 2:
            if self.g2_mode == "zero":
                return JetArray.zeros(n, order, (n, n))
            if self.g2_mode == "solved":
                return self._solved_coefficient(x0, order, 2)
            return self._closed_g2(x0, order)
        if m == 3:
            return self._solved_coefficient(x0, order, 3)
        raise ValueError("expansion coefficients implemented for m = 1, 2, 3")

    def _closed_g2(self, x0, order: int) -> JetArray:
        """g2 = (DDJ - Lap P - 2 W.P + 2(n-2) P.P - |P|^2 g) / (n - 4)."""
        n = self.n
        if n == 4:
            raise CriticalDimensionError("closed-form second coefficient needs n != 4")
        eng = self.base.engine(x0, order + 4)
        p = eng.schouten
        gi = eng.ginv.truncate(p.order)
        g = eng.gj.truncate(p.order)
        pup = jdot(p, gi, 1, 0)  # P_i^a
        jtr = jtrace(pup, 0, 1)  # J
        ddj = eng.covd_array(eng.covd_array(jtr, ()), (DOWN,))
        lap_p = eng.laplacian(JetField(p, (DOWN, DOWN))).data
        pup2 = jdot(gi, jdot(gi, p, 1, 1), 1, 1)  # P^km
        wp = jtrace(jdot(pup2, eng.weyl, 0, 0), 0, 2)  # W_kimj P^km
        pp = jdot(pup, p, 1, 0)  # P_i^a P_aj
        norm_p2 = jtrace(jdot(pup, pup, 1, 0), 0, 1)
        out = (
            ddj
            - lap_p
            - wp.scale(2.0)
            + pp.scale(2.0 * (n - 2))
            - jmul(norm_p2, g)
        )
        return out.truncate(order).scale(1.0 / (n - 4))

    def _solved_coefficient(self, x0, order: int, m: int) -> JetArray:
        key = (tuple(float(c) for c in x0), order, m)
        with self._lock:
            cached = self._solved.get(key)
        if cached is None:
            cached = solve_expansion_jets(self, m, x0, order)
            with self._lock:
                self._solved[key] = cached
        return cached

    # -- metric assembly ---------------------------------------------------
    def h_jets(self, point, order: int) -> JetArray:
        point = _as_point(self, point)
        n, dim = self.n, self.dim
        t0, x0, rho0 = point[0], point[1 : n + 1], point[n + 1]
        if t0 <= 0:
            raise SingularEvaluationError("ambient evaluation needs t > 0")

        t = JetScalar.coordinate(dim, order, 0, t0)
        rho = JetScalar.coordinate(dim, order, n + 1, rho0)
        t2 = t * t

        base_order = order + 2
        g = self.base.jets(x0, base_order).truncate(order).promote(dim, 1)
        tangential = g
        terms = [(m, self.coefficient_jets(x0, max(order - m, 0), m)) for m in range(1, self.expansion_order + 1)]
        if self.extra_coefficient is not None:
            me, arr = self.extra_coefficient
            terms.append((me, JetArray.from_values(n, 0, arr)))
        for m, coeff in terms:
            # x-jets of order (order - m) suffice: rho^m shifts degrees up by m,
            # so zero-padding to full order is exact
            amb = coeff.promote(dim, min(coeff.order, order)).pad(order)
            rm = rho**m
            tangential = tangential + jmul(amb, JetArray(dim, rm.order, rm.c))
        out = JetArray.zeros(dim, order, (dim, dim))
        block = jmul(tangential, JetArray(dim, t2.order, t2.c))
        out.values[1 : n + 1, 1 : n + 1, : block.nb] = block.values
        tt = rho * 2.0
        out.values[0, 0, : tt.c.size] = tt.c
        out.values[0, n + 1, : t.c.size] = t.c
        out.values[n + 1, 0, : t.c.size] = t.c

        if self.perturbation is not None:
            mode, eps, data = self.perturbation
            if mode == "break_dalpha":
                # eps * rho * t * theta_a (dx^a dt + dt dx^a); the t-power is
                # fixed by homogeneity of degree 2
                s = (rho * t).c * eps
                for a in range(n):
                    out.values[0, 1 + a, : s.size] += data[a] * s
                    out.values[1 + a, 0, : s.size] += data[a] * s
            elif mode == "preserve":
                s = ((rho * rho) * t2).c * eps
                for a in range(n):
                    for b in range(n):
                        out.values[1 + a, 1 + b, : s.size] += data[a, b] * s
            else:
                raise ValueError(f"unknown perturbation mode '{mode}'")
        return out

    def engine(self, point, order: int) -> CurvatureEngine:
        point = _as_point(self, point)
        key = (point, order)
        with self._lock:
            eng = self._engines.get(key)
        if eng is None:
            eng = CurvatureEngine(self.h_jets(point, order), ambient=True)
            with self._lock:
                self._engines[key] = eng
        return eng

    # -- canonical fields ---------------------------------------------------
    def x_vector_jets(self, point, order: int) -> JetArray:
        """The dilation field X = t d_t as a jet array of components."""
        point = _as_point(self, point)
        out = JetArray.zeros(self.dim, order, (self.dim,))
        out.values[0] = JetScalar.coordinate(self.dim, order, 0, point[0]).c
        return out

    def x_form_jets(self, point, order: int) -> JetArray:
        """X lowered with h (the one-form dual to the dilation field)."""
        eng = self.engine(point, order)
        xv = self.x_vector_jets(point, order)
        return jdot(eng.gj, xv, 1, 0)

    def dalpha_jets(self, point, order: int) -> JetArray:
        """Exterior derivative of the dual one-form, as jets of a 2-form."""
        da = self.x_form_jets(point, order + 1).grad()  # (A, B) = d_A alpha_B
        return JetArray(da.dim, da.order, da.values - np.swapaxes(da.values, 0, 1))

    def r_jets(self, point, order: int) -> JetArray:
        """Defining function r = rho t^2 as a jet."""
        point = _as_point(self, point)
        t = JetScalar.coordinate(self.dim, order, 0, point[0])
        rho = JetScalar.coordinate(self.dim, order, self.n + 1, point[self.n + 1])
        return JetArray(self.dim, order, (rho * t * t).c)

    def frame(self, qpoint: QPoint) -> "AdaptedFrame":
        return AdaptedFrame.at(self, qpoint)


@dataclass(frozen=True, eq=False)
class AdaptedFrame:
    """Frame X, xi_1..xi_n (tangent to Q), Y with the standard pairings.

    xi_i = t^{-1} d_i are homogeneous of degree -1; Y is the null vector with
    h(X, Y) = 1 orthogonal to the xi_i; eta_i is the dual family with
    h(eta_i, xi_j) = delta_ij and h(eta_i, X) = h(eta_i, Y) = 0.
    """

    qpoint: QPoint
    h: np.ndarray
    X: np.ndarray
    xis: np.ndarray  # (n, dim)
    Y: np.ndarray
    etas: np.ndarray  # (n, dim)

    @staticmethod
    def at(chart: AmbientChart, qpoint: QPoint) -> "AdaptedFrame":
        n, dim = chart.n, chart.dim
        h = chart.engine(qpoint, 0).gj.value()
        t0 = qpoint.t
        X = np.zeros(dim)
        X[0] = t0
        xis = np.zeros((n, dim))
        for i in range(n):
            xis[i, 1 + i] = 1.0 / t0
        # Y: h(X,Y)=1, h(xi_i,Y)=0, then shift along X to make it null
        rows = np.vstack([X @ h, xis @ h])
        rhs = np.concatenate(([1.0], np.zeros(n)))
        y0, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
        y = y0 - 0.5 * float(y0 @ h @ y0) * X
        # duals: eta_i with h(eta_i, xi_j) = delta, h(eta_i, X) = h(eta_i, Y) = 0
        mat = np.vstack([xis @ h, [X @ h], [y @ h]])
        targets = np.zeros((dim, n))
        targets[:n, :n] = np.eye(n)
        etas = np.linalg.solve(mat, targets).T
        return AdaptedFrame(qpoint, h, X, xis, y, etas)

    def tractor_basis(self) -> np.ndarray:
        """Columns (Y, xi_1..xi_n, X): ambient vectors carrying tractor slots."""
        return np.column_stack([self.Y, *self.xis, self.X])

    def tractor_extract(self) -> np.ndarray:
        """Rows extracting (sigma, mu^i, tau) components from an ambient vector."""
        return np.vstack([self.X @ self.h, self.etas @ self.h, [self.Y @ self.h]])


# ---------------------------------------------------------------------------
# expansion solving (the evaluation-based oracle)
# ---------------------------------------------------------------------------

def _sym_basis(n: int) -> list[np.ndarray]:
    out = []
    for k in range(n):
        for l in range(k, n):
            e = np.zeros((n, n))
            e[k, l] = e[l, k] = 1.0
            out.append(e)
    return out


def _rho_coefficient_indices(n: int, amb_order: int, k: int, base_order: int) -> np.ndarray:
    """Ambient basis indices of monomials x^m rho^k (t-degree 0), |m| <= base_order."""
    idx = index_of(n + 2, amb_order)
    out = np.empty(basis_size(n, base_order), dtype=np.int64)
    for i, m in enumerate(basis(n, base_order)):
        out[i] = idx[(0, *m, k)]
    return out


def _tangential_ricci_rho_coefficient(chart: AmbientChart, x0, m: int, x_order: int) -> JetArray:
    """Base-variable jets of the rho^(m-1) coefficient of Ric(h)_ij at (1, x0, 0)."""
    n = chart.n
    amb_order = x_order + (m - 1) + 2
    eng = chart.engine((1.0, *x0, 0.0), amb_order)
    ric = eng.ric  # ambient jets, order amb_order - 2 >= x_order + m - 1
    table = _rho_coefficient_indices(n, ric.order, m - 1, x_order)
    vals = ric.values[1 : n + 1, 1 : n + 1][..., table]
    return JetArray(n, x_order, vals)


def solve_expansion_jets(chart: AmbientChart, m: int, x0, order: int) -> JetArray:
    """Jets of the m-th expansion coefficient from the order-by-order Ricci solve.

    The unknown enters the rho^(m-1) tangential Ricci coefficient affinely and
    algebraically, so evaluating the residual on the constant symmetric basis
    assembles a linear system over the jet ring.
    """
    n = chart.n
    if 2 * m == n:
        raise CriticalDimensionError(f"expansion order m = n/2 = {m} is obstructed")
    lower = replace_chart(chart, expansion_order=m - 1, extra_coefficient=None)
    x0 = tuple(float(c) for c in x0)
    b = _tangential_ricci_rho_coefficient(lower, x0, m, order)
    basis_elems = _sym_basis(n)
    cols = []
    for e in basis_elems:
        probe = replace_chart(chart, expansion_order=m - 1, extra_coefficient=(m, e))
        r = _tangential_ricci_rho_coefficient(probe, x0, m, order)
        cols.append(r - b)
    pairs = [(k, l) for k in range(n) for l in range(k, n)]
    nb = b.nb
    amat = JetArray(n, order, np.zeros((len(pairs), len(pairs), nb)))
    bvec = JetArray(n, order, np.zeros((len(pairs), nb)))
    for row, (k, l) in enumerate(pairs):
        bvec.values[row] = b.values[k, l]
        for col in range(len(pairs)):
            amat.values[row, col] = cols[col].values[k, l]
    cond = np.linalg.cond(amat.value())
    if not np.isfinite(cond) or cond > 1e10:
        raise SingularEvaluationError(
            f"singular linear system in expansion solve at order {m} (cond={cond:.2e})"
        )
    sol = jet_linear_solve(amat, bvec.scale(-1.0))
    out = JetArray(n, order, np.zeros((n, n, nb)))
    for row, (k, l) in enumerate(pairs):
        out.values[k, l] = sol.values[row]
        out.values[l, k] = sol.values[row]
    return out


def replace_chart(chart: AmbientChart, **kwargs) -> AmbientChart:
    fields = dict(
        base=chart.base,
        expansion_order=chart.expansion_order,
        g1_mode=chart.g1_mode,
        g2_mode=chart.g2_mode,
        perturbation=chart.perturbation,
        label=chart.label,
        extra_coefficient=chart.extra_coefficient,
    )
    fields.update(kwargs)
    return AmbientChart(**fields)


def build_ambient(base: ChartMetric, expansion_order: int = 2, **kwargs) -> AmbientChart:
    """Default ambient chart over a base metric (closed-form coefficients)."""
    return AmbientChart(base, expansion_order=expansion_order, **kwargs)


def solve_expansion(base_or_chart, order: int, point) -> np.ndarray:
    """Pointwise expansion coefficient g^(order)(point) from the linear solve."""
    chart = base_or_chart if isinstance(base_or_chart, AmbientChart) else build_ambient(base_or_chart)
    if order not in (1, 2, 3):
        raise ValueError("solve_expansion implemented for orders 1..3")
    return solve_expansion_jets(chart, order, point, 0).value()


def perturb_ambient(chart: AmbientChart, mode: str, eps: float, seed: int = 0) -> AmbientChart:
    """Perturbed charts: 'break_dalpha' breaks the closedness of the dual
    one-form along Q; 'preserve' adds rho^2 terms that keep it intact."""
    rng = np.random.default_rng(seed)
    n = chart.n
    if eps == 0.0:
        return chart
    if mode == "break_dalpha":
        theta = rng.uniform(0.5, 1.0, size=n)
        data = theta
    elif mode == "preserve":
        sigma = rng.uniform(-1.0, 1.0, size=(n, n))
        data = 0.5 * (sigma + sigma.T)
    else:
        raise ValueError(f"unknown perturbation mode '{mode}'")
    return replace_chart(chart, perturbation=(mode, float(eps), data), label=f"{chart.label}+{mode}")


# ---------------------------------------------------------------------------
# axiom checks
# ---------------------------------------------------------------------------

def homogeneity_residual(chart: AmbientChart, point, scales=(0.7, 1.3)) -> float:
    """Max deviation of (pullback under t -> st of h) from s^2 h at a point."""
    point = _as_point(chart, point)
    h0 = chart.engine(point, 0).gj.value()
    worst = 0.0
    for s in scales:
        scaled = (float(s) * point[0], *point[1:])
        hs = chart.engine(scaled, 0).gj.value()
        jac = np.ones(chart.dim)
        jac[0] = s
        pull = jac[:, None] * jac[None, :] * hs
        worst = max(worst, float(np.max(np.abs(pull - s**2 * h0))))
    return worst


def initial_condition_residual(chart: AmbientChart, qpoint: QPoint) -> float:
    """Deviation of h restricted to TQ from the cone metric t^2 g (plus X-nullity)."""
    n = chart.n
    h = chart.engine(qpoint, 0).gj.value()
    gx = chart.base.jets(qpoint.x, 0).value()
    resid = np.max(np.abs(h[1 : n + 1, 1 : n + 1] - qpoint.t**2 * gx))
    resid = max(resid, float(np.max(np.abs(h[0, : n + 1]))))  # h(d_t, tangential) on Q
    return float(resid)


def check_alpha_conditions(chart: AmbientChart, points) -> dict:
    """Report on the dual one-form along Q: closedness, the dilation identity
    nabla X = id, and Y.r = 1."""
    report = {"dalpha_on_q": 0.0, "nabla_x_minus_id": 0.0, "y_dot_r_minus_1": 0.0, "lap_r_minus_n2": 0.0}
    for qp in points:
        eng = chart.engine(qp, 2)
        da = chart.dalpha_jets(qp.coords(), 1).value()
        report["dalpha_on_q"] = max(report["dalpha_on_q"], float(np.max(np.abs(da))))
        xvec = JetField(chart.x_vector_jets(qp.coords(), 2), (UP,), 1)
        dx = eng.covd(xvec).value()  # (A, B) = nabla_A X^B
        report["nabla_x_minus_id"] = max(
            report["nabla_x_minus_id"], float(np.max(np.abs(dx - np.eye(chart.dim))))
        )
        frame = chart.frame(qp)
        dr = chart.r_jets(qp.coords(), 1).grad().value()
        report["y_dot_r_minus_1"] = max(report["y_dot_r_minus_1"], abs(float(frame.Y @ dr) - 1.0))
        rfield = JetField(chart.r_jets(qp.coords(), 2), (), 2)
        lap_r = float(eng.laplacian(rfield).value())
        report["lap_r_minus_n2"] = max(report["lap_r_minus_n2"], abs(lap_r - (chart.n + 2)))
    return report


def ricci_components(chart: AmbientChart, point) -> np.ndarray:
    """Point values of the ambient Ricci tensor."""
    return chart.engine(point, 2).ric.value()


def ricci_order_report(chart: AmbientChart, x0, t0: float = 1.0, delta: float = 1e-3, tol: float = 1e-7) -> dict:
    """Empirical vanishing orders of Ric(h) along Q, by finite differences in rho.

    Tangential components of this normal form vanish identically on Q as
    fields over Q once they vanish pointwise, so the rho-derivatives are the
    binding ones; 'order k' means all rho-derivatives below k vanish.
    """
    n = chart.n
    samples = {}
    for k in (-2, -1, 0, 1, 2):
        samples[k] = ricci_components(chart, (t0, *x0, k * delta))
    d0 = samples[0]
    d1 = (samples[1] - samples[-1]) / (2 * delta)
    d2 = (samples[1] - 2 * samples[0] + samples[-1]) / delta**2

    tang = np.ix_(range(n + 1), range(n + 1))

    def order_of(stack):
        order = 0
        for est in stack:
            if np.max(np.abs(est)) > tol:
                break
            order += 1
        return order

    return {
        "full_order": order_of([d0, d1, d2]),
        "tangential_order": order_of([d0[tang], d1[tang], d2[tang]]),
        "derivative_magnitudes": [float(np.max(np.abs(d))) for d in (d0, d1, d2)],
    }


# ---------------------------------------------------------------------------
# curvature / one-form identity and normality
# ---------------------------------------------------------------------------

def curvature_dalpha_identity(chart: AmbientChart, point, xi, eta, zeta) -> dict:
    """h(R(xi,eta)X, zeta) = -1/2 (nabla dalpha)(zeta, xi, eta), any chart."""
    point = _as_point(chart, point)
    eng = chart.engine(point, 3)
    riem = eng.riem.value()
    xv = chart.x_vector_jets(point, 0).value()
    lhs = float(np.einsum("abcd,a,b,c,d->", riem, xi, eta, zeta, xv))
    da = JetField(chart.dalpha_jets(point, 2), (DOWN, DOWN))
    dda = eng.covd(da).value()  # (z, a, b) = nabla_z (dalpha)_ab
    rhs = -0.5 * float(np.einsum("zab,z,a,b->", dda, zeta, xi, eta))
    anti = float(np.einsum("abcd,a,b,d,c->", riem, xi, eta, zeta, xv))
    return {"lhs": lhs, "rhs": rhs, "residual": abs(lhs - rhs), "antisymmetry": abs(lhs + anti)}


def normality_check(chart: AmbientChart, points) -> dict:
    """Filtration preservation and the Ricci-type contraction along Q.

    For invariant lifts of base vectors the curvature must send the
    distinguished null line to itself and the whole space into its
    orthogonal; the Ricci-type contraction over an adapted frame vanishes
    exactly when the tangential ambient Ricci does, which the report
    cross-checks with the frame-sum identity
      sum_i h(R(xi_i, v)w, eta_i) + h(R(X, v)w, Y) + h(R(Y, v)w, X) = Ric(v, w).
    """
    n = chart.n
    out = {
        "t1_preserved": 0.0,
        "t0_preserved": 0.0,
        "ricci_contraction": 0.0,
        "tangential_ricci": 0.0,
        "frame_sum_identity": 0.0,
    }
    for qp in points:
        eng = chart.engine(qp, 2)
        riem = eng.riem.value()
        ric = eng.ric.value()
        frame = chart.frame(qp)
        lifts = np.eye(chart.dim)[1 : n + 1]  # invariant lifts d_i of base vectors
        # (a) h(R(lift_i, lift_j) X, zeta) and h(R(lift_i, lift_j) zeta, X)
        to_x = np.einsum("abcd,ia,jb,d->ijc", riem, lifts, lifts, frame.X)
        out["t1_preserved"] = max(out["t1_preserved"], float(np.max(np.abs(to_x))))
        from_x = np.einsum("abcd,ia,jb,c->ijd", riem, lifts, lifts, frame.X)
        out["t0_preserved"] = max(out["t0_preserved"], float(np.max(np.abs(from_x))))
        # (b) Ricci-type contraction over the adapted frame
        contraction = np.einsum("abcd,ka,kc,ib,jd->ij", riem, frame.xis, frame.etas, lifts, lifts)
        out["ricci_contraction"] = max(out["ricci_contraction"], float(np.max(np.abs(contraction))))
        xterm = np.einsum("abcd,a,c,ib,jd->ij", riem, frame.X, frame.Y, lifts, lifts)
        yterm = np.einsum("abcd,a,c,ib,jd->ij", riem, frame.Y, frame.X, lifts, lifts)
        ric_proj = np.einsum("bd,ib,jd->ij", ric, lifts, lifts)
        out["frame_sum_identity"] = max(
            out["frame_sum_identity"], float(np.max(np.abs(contraction + xterm + yterm - ric_proj)))
        )
        tang = ric[: n + 1, : n + 1]
        out["tangential_ricci"] = max(out["tangential_ricci"], float(np.max(np.abs(tang))))
    out["normal"] = out["ricci_contraction"] <= 1e-8 and out["t1_preserved"] <= 1e-8
    return out


def dilation_ricci_identity(chart: AmbientChart, qpoint: QPoint) -> dict:
    """Both sides of 2 Ric(X, xi) = n dalpha(xi, Y) on Q for tangential xi."""
    n = chart.n
    ric = ricci_components(chart, qpoint)
    da = chart.dalpha_jets(qpoint.coords(), 0).value()
    frame = chart.frame(qpoint)
    lifts = np.eye(chart.dim)[1 : n + 1]
    lhs = 2.0 * np.einsum("ab,a,ib->i", ric, frame.X, lifts)
    rhs = n * np.einsum("ab,ia,b->i", da, lifts, frame.Y)
    denom = max(np.max(np.abs(lhs)), np.max(np.abs(rhs)), 1e-300)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "lhs_max": float(np.max(np.abs(lhs))),
        "rhs_max": float(np.max(np.abs(rhs))),
        "rel_residual": float(np.max(np.abs(lhs - rhs)) / denom),
        "ixdalpha_on_q": float(np.max(np.abs(da @ frame.X))),
    }


# ---------------------------------------------------------------------------
# tangential operators
# ---------------------------------------------------------------------------

def _t_degree_mask(dim: int, order: int) -> np.ndarray:
    return np.array([m[0] for m in basis(dim, order)])



def t_power_jet(chart: AmbientChart, point, order: int, power: int) -> JetScalar:
    point = _as_point(chart, point)
    t = JetScalar.coordinate(chart.dim, order, 0, point[0])
    return t**power


def random_homogeneous_field(
    chart: AmbientChart, point, order: int, rank: int, weight: int, rng
) -> JetField:
    """Random all-covariant ambient field of exact conformal weight ``weight``.

    A covariant component with q indices equal to t must scale like
    t^(homogeneity - q), where homogeneity = weight + rank; the remaining
    dependence on (x, rho) is a random polynomial.
    """
    point = _as_point(chart, point)
    dim = chart.dim
    hom = weight + rank
    mask = (_t_degree_mask(dim, order) == 0).astype(float)
    vals = rng.uniform(-1.0, 1.0, size=(dim,) * rank + (basis_size(dim, order),)) * mask
    out = JetArray(dim, order, vals)
    powers = {}
    for comp in np.ndindex(*((dim,) * rank)):
        q = sum(1 for c in comp if c == 0)
        if q not in powers:
            powers[q] = t_power_jet(chart, point, order, 1) ** (hom - q)
        pj = powers[q]
        out.values[comp] = (JetScalar(dim, order, out.values[comp].copy()) * pj).c
    return JetField(out, (DOWN,) * rank, weight)


def double_d(chart: AmbientChart, phi: JetField, point) -> JetField:
    """Antisymmetrized dilation-derivative pair: (X_A nabla_B - X_B nabla_A) phi."""
    point = _as_point(chart, point)
    eng = chart.engine(point, phi.order)
    dphi = eng.covd(phi)
    xf = chart.x_form_jets(point, dphi.order)
    # X_A (nabla phi)_B...: broadcast X over a new leading axis
    xa = JetArray(xf.dim, xf.order, xf.values[:, None, ...].reshape((chart.dim, 1) + (1,) * phi.rank + (xf.values.shape[-1],)))
    db = JetArray(dphi.data.dim, dphi.data.order, dphi.data.values[None, ...])
    term = jmul(xa, db)  # (A, B, indices)
    anti = JetArray(term.dim, term.order, term.values - np.swapaxes(term.values, 0, 1))
    return JetField(anti, (DOWN, DOWN) + phi.variances, phi.weight)


def tractor_d(chart: AmbientChart, phi: JetField, point, form: str = "weight") -> JetField:
    """Second-order tangential operator along Q.

    ``form='weight'`` uses (n + 2w - 2) nabla_A - X_A Lap on a field of
    conformal weight w; ``form='expanded'`` uses the equivalent
    (n - 2) nabla_A + 2 nabla_A X^B nabla_B - X_A Lap without using the
    weight.  n is the base dimension.
    """
    point = _as_point(chart, point)
    n = chart.n
    eng = chart.engine(point, phi.order)
    xf = chart.x_form_jets(point, max(phi.order - 2, 0))
    lap = eng.laplacian(phi)
    xlap = jmul(
        JetArray(xf.dim, xf.order, xf.values.reshape((chart.dim,) + (1,) * phi.rank + (-1,))),
        JetArray(lap.data.dim, lap.data.order, lap.data.values[None, ...]),
    )
    if form == "weight":
        if phi.weight is None:
            raise ValueError("weight form needs a weighted field")
        first = eng.covd(phi).data.scale(float(n + 2 * phi.weight - 2))
    elif form == "expanded":
        dphi = eng.covd(phi)
        xv = chart.x_vector_jets(point, dphi.order)
        xdir = jdot(xv, dphi.data, 0, 0)  # X^B (nabla phi)_B... -> phi-shaped
        second = eng.covd_array(xdir, phi.variances)
        first = eng.covd(phi).data.scale(float(n - 2)) + second.scale(2.0)
    else:
        raise ValueError("form must be 'weight' or 'expanded'")
    data = first - xlap
    w = None if phi.weight is None else phi.weight - 1
    return JetField(data, (DOWN,) + phi.variances, w)


def tangentiality_check(chart: AmbientChart, qpoint: QPoint, count: int = 50, seed: int = 0) -> dict:
    """Both tangential operators annihilate r V on Q, for random homogeneous V."""
    rng = np.random.default_rng(seed)
    point = qpoint.coords()
    worst_d = 0.0
    worst_dd = 0.0
    for _ in range(count):
        rank = int(rng.integers(0, 3))
        weight = int(rng.integers(-2, 3))
        v = random_homogeneous_field(chart, point, 3, rank, weight, rng)
        rv = JetField(jmul(chart.r_jets(point, v.order), v.data), v.variances, v.weight + 2)
        d1 = tractor_d(chart, rv, point).value()
        worst_d = max(worst_d, float(np.max(np.abs(d1))))
        d2 = double_d(chart, rv, point).value()
        worst_dd = max(worst_dd, float(np.max(np.abs(d2))))
    return {"tractor_d_max": worst_d, "double_d_max": worst_dd, "count": count}


# ---------------------------------------------------------------------------
# curvature reconstruction along Q
# ---------------------------------------------------------------------------

def _check_recursion_hypotheses(chart: AmbientChart, qpoint: QPoint, k: int) -> dict:
    orders = ricci_order_report(chart, qpoint.x, t0=qpoint.t)
    if orders["full_order"] < k + 1 or orders["tangential_order"] < k + 2:
        raise HypothesisViolatedError(
            f"Ricci vanishing orders {orders} below required ({k + 1}, {k + 2}) for k={k}"
        )
    return orders


def reduced_curvature_identity(chart: AmbientChart, qpoint: QPoint, check_hypotheses: bool = True) -> dict:
    """Reconstruction of the curvature from its dilation-wedged extension.

    With the Ricci curvature vanishing on Q and tangentially to second
    order, contracting the tangential second-order operator into
    3 X_[A R_BC]EF recovers (n-2)(n-4) R_BCEF on Q.
    """
    n = chart.n
    if n == 4:
        raise CriticalDimensionError("reconstruction factor (n-2)(n-4) vanishes for n = 4")
    hypotheses = _check_recursion_hypotheses(chart, qpoint, 0) if check_hypotheses else None
    point = qpoint.coords()
    eng = chart.engine(point, 4)
    riem = eng.riem  # order 2
    xf = chart.x_form_jets(point, riem.order)
    # T_ABCEF = X_A R_BCEF + X_B R_CAEF + X_C R_ABEF  (= 3 X_[A R_BC]EF)
    xa = JetArray(xf.dim, xf.order, xf.values.reshape((chart.dim, 1, 1, 1, 1, -1)))
    rb = JetArray(riem.dim, riem.order, riem.values[None, ...])
    xr = jmul(xa, rb)  # (A, B, C, E, F)
    tvals = xr.values + np.einsum("bcaef...->abcef...", xr.values) + np.einsum("cabef...->abcef...", xr.values)
    tfield = JetField(JetArray(xr.dim, xr.order, tvals), (DOWN,) * 5, -1)
    dt = tractor_d(chart, tfield, point)  # (G, A, B, C, E, F), weight -2
    raised = jdot(eng.ginv.truncate(dt.order), dt.data, 1, 0)
    lhs = jtrace(raised, 0, 1).value()  # contract G with A -> (B, C, E, F)
    rhs = float((n - 2) * (n - 4)) * riem.value()
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "factor": float((n - 2) * (n - 4)),
        "rel_residual": float(np.max(np.abs(lhs - rhs)) / scale),
        "hypotheses": hypotheses,
    }


def derivative_recursion(chart: AmbientChart, k: int, qpoint: QPoint, check_hypotheses: bool = True) -> dict:
    """Reconstruct nabla^k R on Q from lower-order data (implemented for k=1).

    Uses D_A nabla^{k-1} R = (n-2k-4) nabla^k R - X_A Lap nabla^{k-1} R and
    replaces the Laplacian by its quadratic-curvature part, which is exact on
    Q when the Ricci curvature vanishes to the required orders.
    """
    n = chart.n
    if k != 1:
        raise NotImplementedError("derivative recursion implemented for k = 1")
    if n == 2 * k + 4:
        raise CriticalDimensionError(f"recursion denominator n - 2k - 4 vanishes (n = {n}, k = {k})")
    hypotheses = _check_recursion_hypotheses(chart, qpoint, k) if check_hypotheses else None
    point = qpoint.coords()
    eng = chart.engine(point, 4)
    riem_field = JetField(eng.riem, (DOWN,) * 4, -2)
    d_riem = tractor_d(chart, riem_field, point).value()  # (n-6) nabla R - X Lap R
    psi = psi_quadratic(eng.riem.value(), eng.ric.value(), eng.ginv.value())
    xf = chart.x_form_jets(point, 0).value()
    recon = (d_riem + np.einsum("a,bcde->abcde", xf, psi)) / float(n - 2 * k - 4)
    direct = eng.covd(riem_field).value()
    scale = max(float(np.max(np.abs(direct))), 1e-300)
    return {
        "reconstructed": recon,
        "direct": direct,
        "rel_residual": float(np.max(np.abs(recon - direct)) / scale),
        "factor": float(n - 2 * k - 4),
        "hypotheses": hypotheses,
    }


def grad_riemann_norm_squared(chart: AmbientChart, qpoint: QPoint) -> float:
    """The scalar |nabla R|^2 of the ambient metric at a Q-point (weight -6)."""
    point = qpoint.coords()
    eng = chart.engine(point, 4)
    dr = eng.covd_array(eng.riem, (DOWN,) * 4).value()
    gi = eng.ginv.value()
    return float(
        np.einsum("eabcd,fghij,ef,ag,bh,ci,dj->", dr, dr, gi, gi, gi, gi, gi)
    )
