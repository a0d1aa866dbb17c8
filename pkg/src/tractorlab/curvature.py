"""Curvature of explicitly given metrics at points, computed through jets.

The same engine serves base metrics (dim n) and ambient metrics (dim n+2):
it consumes a matrix of metric-component jets and produces Christoffel
symbols, the full curvature family, and iterated covariant derivatives, all
as arrays of jets so that further exact derivatives remain available.

Curvature sign conventions (pinned by the tests):
    [nabla_a, nabla_b] V^c = R_ab^c_d V^d
    R_abcd = g_ce R_ab^e_d,   Ric_ab = R_ca^c_b,   S = g^ab Ric_ab
    P_ab = (Ric_ab - S g_ab / (2(n-1))) / (n-2)
    W_abcd = R_abcd - g_ac P_bd + g_bc P_ad + g_ad P_bc - g_bd P_ac
    C_abd = nabla_a P_bd - nabla_b P_ad
    U_abcd = nabla_a C_cdb + P_a^e W_ebcd
    B_eb = nabla^q nabla^p W_peqb + (n-3) P^qp W_peqb
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy

from .errors import DimensionError, SingularMetricError
from .jets import JetArray, JetPoint, jdot, jet_matrix_inverse, jmul, jtrace, lift
from .tensor import DOWN, UP, MetricAtPoint, PointTensor

_coord_cache: dict[int, tuple] = {}


def coords(dim: int):
    """Chart coordinate symbols x1..xdim (shared per dimension)."""
    if dim not in _coord_cache:
        _coord_cache[dim] = sympy.symbols(f"x1:{dim + 1}")
    return _coord_cache[dim]


def _t(arr: np.ndarray, spec: str) -> np.ndarray:
    """Index transpose of a coefficient block, e.g. _t(v, 'acbd->abcd')."""
    src, dst = spec.split("->")
    return np.einsum(f"{src}...->{dst}...", arr)


@dataclass(eq=False)
class ChartMetric:
    """A metric given by closed-form coordinate expressions."""

    dim: int
    signature: tuple[int, int]
    components: tuple  # dim x dim nested tuple of sympy expressions
    label: str = ""

    def __post_init__(self):
        comps = [
            [sympy.sympify(self.components[i][j]) for j in range(self.dim)]
            for i in range(self.dim)
        ]
        for i in range(self.dim):
            for j in range(i):
                if sympy.simplify(comps[i][j] - comps[j][i]) != 0:
                    raise ValueError("metric components must be symmetric")
        self.components = tuple(tuple(row) for row in comps)
        self._engine_cache: dict = {}
        self._cache_lock = threading.Lock()

    @property
    def coords(self):
        return coords(self.dim)

    def jets(self, point, order: int) -> JetArray:
        jp = JetPoint(tuple(float(c) for c in point), order)
        xs = self.coords
        out = JetArray.zeros(self.dim, order, (self.dim, self.dim))
        for i in range(self.dim):
            for j in range(i, self.dim):
                jc = lift(self.components[i][j], jp, xs)
                out.values[i, j] = jc.c
                out.values[j, i] = jc.c
        return out

    def engine(self, point, order: int) -> "CurvatureEngine":
        key = (tuple(float(c) for c in point), order)
        with self._cache_lock:
            eng = self._engine_cache.get(key)
        if eng is None:
            eng = CurvatureEngine(self.jets(point, order))
            with self._cache_lock:
                self._engine_cache[key] = eng
        return eng

    def metric_at(self, point) -> MetricAtPoint:
        values = self.jets(point, 0).value()
        return MetricAtPoint.from_values(values, self.signature, weight=2)

    def rescaled(self, factor) -> "ChartMetric":
        """Conformally rescaled representative f^2 g."""
        f2 = sympy.sympify(factor) ** 2
        comps = tuple(tuple(f2 * c for c in row) for row in self.components)
        return ChartMetric(self.dim, self.signature, comps, label=f"{self.label}*f^2")


@dataclass(frozen=True, eq=False)
class JetField:
    """A tensor field known through the jets of its components at one point."""

    data: JetArray
    variances: tuple[str, ...]
    weight: int | None = None

    @property
    def dim(self) -> int:
        return self.data.dim

    @property
    def order(self) -> int:
        return self.data.order

    @property
    def rank(self) -> int:
        return len(self.variances)

    def value(self) -> np.ndarray:
        return self.data.value()

    def tensor(self) -> PointTensor:
        return PointTensor(self.dim, self.variances, self.weight or 0, self.data.value())

    def truncate(self, order: int) -> "JetField":
        return JetField(self.data.truncate(order), self.variances, self.weight)


class CurvatureEngine:
    """Curvature data of one metric at one point, lazily computed as jets.

    ``ambient=True`` switches the weight ledger to the homogeneity-counted
    convention: each covariant derivative lowers the weight by one and the
    metric raises/lowers at weight zero.  Base metrics keep density weights
    fixed under differentiation and shift them by +-2 per metric factor.
    """

    def __init__(self, gj: JetArray, ambient: bool = False):
        self.gj = gj
        self.dim = gj.shape[0]
        self.order = gj.order
        self.ambient = ambient
        self.metric_weight = 0 if ambient else 2
        self.weight_step = -1 if ambient else 0
        if abs(np.linalg.det(gj.value())) < 1e-10:
            raise SingularMetricError("metric determinant below 1e-10 at evaluation point")

    # -- metric level ---------------------------------------------------
    @cached_property
    def ginv(self) -> JetArray:
        return jet_matrix_inverse(self.gj)

    @cached_property
    def metric(self) -> MetricAtPoint:
        return MetricAtPoint.from_values(self.gj.value(), weight=self.metric_weight)

    @cached_property
    def gamma(self) -> JetArray:
        """Christoffel symbols Gamma^a_bc as jets (order drops by one)."""
        dg = self.gj.grad().values  # dg[e, a, b] = d_e g_ab
        # sym[d, b, c] = d_b g_dc + d_c g_db - d_d g_bc
        sym = _t(dg, "bdc->dbc") + _t(dg, "cdb->dbc") - _t(dg, "dbc->dbc")
        lower = JetArray(self.gj.dim, self.gj.order - 1, sym)
        return jdot(self.ginv.truncate(lower.order), lower, 1, 0).scale(0.5)

    # -- curvature ------------------------------------------------------
    @cached_property
    def riem_mixed(self) -> JetArray:
        """R_ab^c_d = d_a Gamma^c_bd - d_b Gamma^c_ad + Gamma^c_ae Gamma^e_bd - Gamma^c_be Gamma^e_ad."""
        gam = self.gamma
        dgam = gam.grad().values  # dgam[x, c, b, d] = d_x Gamma^c_bd
        anti = _t(dgam, "acbd->abcd")
        anti = anti - np.swapaxes(anti, 0, 1)
        gg = jdot(gam, gam, 2, 0)  # gg[c, a, b, d] = Gamma^c_ae Gamma^e_bd
        quad = _t(gg.values, "cabd->abcd")
        quad = quad - np.swapaxes(quad, 0, 1)
        out = JetArray(gam.dim, gam.order - 1, anti)
        return out + JetArray(gam.dim, gg.order, quad)

    @cached_property
    def riem(self) -> JetArray:
        """Fully lowered curvature R_abcd."""
        k = self.riem_mixed.order
        lowered = jdot(self.gj.truncate(k), self.riem_mixed, 1, 2)  # (c, a, b, d)
        return JetArray(lowered.dim, lowered.order, _t(lowered.values, "cabd->abcd"))

    @cached_property
    def ric(self) -> JetArray:
        return jtrace(self.riem_mixed, 0, 2)

    @cached_property
    def scal(self) -> JetArray:
        return jtrace(jdot(self.ginv.truncate(self.ric.order), self.ric, 1, 0), 0, 1)

    @cached_property
    def schouten(self) -> JetArray:
        n = self.dim
        if n < 3:
            raise DimensionError("Schouten tensor needs dim >= 3")
        trace_part = jmul(self.scal, self.gj.truncate(self.scal.order)).scale(1.0 / (2.0 * (n - 1)))
        return (self.ric - trace_part).scale(1.0 / (n - 2))

    @cached_property
    def weyl(self) -> JetArray:
        g = self.gj.truncate(self.schouten.order)
        p = self.schouten
        d = self.dim
        nb = p.nb
        ga = JetArray(g.dim, p.order, np.broadcast_to(g.values[:, :, None, None, :nb], (d, d, d, d, nb)))
        pa = JetArray(g.dim, p.order, np.broadcast_to(p.values[None, None, :, :, :], (d, d, d, d, nb)))
        gP = jmul(ga, pa).values  # gP[x, y, z, w] = g_xy P_zw
        w = self.riem.truncate(p.order).values.copy()
        w -= _t(gP, "acbd->abcd")  # g_ac P_bd
        w += _t(gP, "bcad->abcd")  # g_bc P_ad
        w += _t(gP, "adbc->abcd")  # g_ad P_bc
        w -= _t(gP, "bdac->abcd")  # g_bd P_ac
        return JetArray(g.dim, p.order, w)

    @cached_property
    def grad_schouten(self) -> JetArray:
        return self.covd_array(self.schouten, (DOWN, DOWN))

    @cached_property
    def cotton(self) -> JetArray:
        """C_abd = nabla_a P_bd - nabla_b P_ad."""
        dp = self.grad_schouten
        return JetArray(dp.dim, dp.order, dp.values - np.swapaxes(dp.values, 0, 1))

    @cached_property
    def u_tensor(self) -> JetArray:
        """U_abcd = nabla_a C_cdb + P_a^e W_ebcd."""
        dc = self.covd_array(self.cotton, (DOWN, DOWN, DOWN))  # (x, a, b, d) = nabla_x C_abd
        term1 = JetArray(dc.dim, dc.order, _t(dc.values, "acdb->abcd"))
        p_up = jdot(self.schouten, self.ginv.truncate(self.schouten.order), 1, 0)  # (a, e) = P_a^e
        term2 = jdot(p_up, self.weyl, 1, 0)  # (a, b, c, d)
        return term1 + term2

    @cached_property
    def bach(self) -> JetArray:
        """B_eb = nabla^q nabla^p W_peqb + (n-3) P^qp W_peqb."""
        n = self.dim
        ddw = self.covd_array(self.covd_array(self.weyl, (DOWN,) * 4), (DOWN,) * 5)
        # ddw[q2, p2, p, e, q, b] = nabla_q2 nabla_p2 W_peqb
        gi = self.ginv.truncate(ddw.order)
        t = jdot(gi, ddw, 1, 1)  # (x, q2, p, e, q, b), x = raised p2
        t = jtrace(t, 0, 2)  # contract x with p -> (q2, e, q, b)
        t = jdot(gi, t, 1, 0)  # (y, e, q, b), y = raised q2
        term1 = jtrace(t, 0, 2)  # contract y with q -> (e, b)
        p2 = jdot(gi, jdot(gi, self.schouten.truncate(ddw.order), 1, 1), 1, 1)  # (q, p) = P^qp
        s = jdot(p2, self.weyl.truncate(ddw.order), 1, 0)  # (q, e, q2, b)
        term2 = jtrace(s, 0, 2)
        return term1 + term2.scale(float(n - 3))

    # -- differential operators ------------------------------------------
    def covd_array(self, t: JetArray, variances) -> JetArray:
        """Covariant derivative; the new (covariant) slot is leftmost."""
        out_order = t.order - 1
        gam = self.gamma.truncate(out_order)
        vals = t.grad().values.copy()
        for s, var in enumerate(variances):
            ts = t.truncate(out_order).moveaxis(s, 0)
            if var == UP:
                corr = jdot(gam, ts, 2, 0)  # (a, e, rest)
                vals += np.moveaxis(corr.values, 0, 1 + s)
            else:
                corr = jdot(gam, ts, 0, 0)  # (e, b, rest)
                vals -= np.moveaxis(corr.values, 1, 1 + s)
        return JetArray(t.dim, out_order, vals)

    def covd(self, f: JetField) -> JetField:
        data = self.covd_array(f.data, f.variances)
        w = None if f.weight is None else f.weight + self.weight_step
        return JetField(data, (DOWN,) + f.variances, w)

    def raise_slot(self, f: JetField, slot: int) -> JetField:
        if f.variances[slot] != DOWN:
            raise ValueError("slot already contravariant")
        data = jdot(self.ginv.truncate(f.order), f.data, 1, slot)
        data = JetArray(data.dim, data.order, np.moveaxis(data.values, 0, slot))
        w = None if f.weight is None else f.weight - self.metric_weight
        return JetField(data, f.variances[:slot] + (UP,) + f.variances[slot + 1 :], w)

    def lower_slot(self, f: JetField, slot: int) -> JetField:
        if f.variances[slot] != UP:
            raise ValueError("slot already covariant")
        data = jdot(self.gj.truncate(f.order), f.data, 1, slot)
        data = JetArray(data.dim, data.order, np.moveaxis(data.values, 0, slot))
        w = None if f.weight is None else f.weight + self.metric_weight
        return JetField(data, f.variances[:slot] + (DOWN,) + f.variances[slot + 1 :], w)

    def trace(self, f: JetField, s1: int, s2: int) -> JetField:
        if {f.variances[s1], f.variances[s2]} != {UP, DOWN}:
            raise ValueError("trace needs one up and one down slot")
        variances = tuple(v for i, v in enumerate(f.variances) if i not in (s1, s2))
        return JetField(jtrace(f.data, s1, s2), variances, f.weight)

    def laplacian(self, f: JetField) -> JetField:
        d2 = self.covd(self.covd(f))
        return self.trace(self.raise_slot(d2, 0), 0, 1)

    # -- exports ---------------------------------------------------------
    def field(self, name: str) -> JetField:
        """Named curvature tensors as weighted fields."""
        table = {
            "metric": (self.gj, (DOWN, DOWN), 0 if self.ambient else 2),
            "riem": (self.riem, (DOWN,) * 4, -2 if self.ambient else 2),
            "ric": (self.ric, (DOWN, DOWN), -2 if self.ambient else 0),
            "schouten": (self.schouten, (DOWN, DOWN), 0),
            "weyl": (self.weyl, (DOWN,) * 4, 2),
            "cotton": (self.cotton, (DOWN,) * 3, 0),
            "u": (self.u_tensor, (DOWN,) * 4, 0),
            "bach": (self.bach, (DOWN, DOWN), -2),
        }
        data, variances, weight = table[name]
        return JetField(data, variances, weight)


# ---------------------------------------------------------------------------
# public point-value operations
# ---------------------------------------------------------------------------

def christoffel(g: ChartMetric, point, order: int = 1) -> PointTensor:
    eng = g.engine(point, max(order, 1))
    return PointTensor(g.dim, (UP, DOWN, DOWN), 0, eng.gamma.value())


def riemann(g: ChartMetric, point, order: int = 2) -> PointTensor:
    eng = g.engine(point, max(order, 2))
    return PointTensor(g.dim, (DOWN,) * 4, 2, eng.riem.value())


def ricci(g: ChartMetric, point, order: int = 2) -> PointTensor:
    eng = g.engine(point, max(order, 2))
    return PointTensor(g.dim, (DOWN, DOWN), 0, eng.ric.value())


def scalar_curvature(g: ChartMetric, point, order: int = 2) -> float:
    eng = g.engine(point, max(order, 2))
    return float(eng.scal.value())


def schouten(g: ChartMetric, point, order: int = 2) -> PointTensor:
    if g.dim < 3:
        raise DimensionError("Schouten tensor needs dim >= 3")
    eng = g.engine(point, max(order, 2))
    return PointTensor(g.dim, (DOWN, DOWN), 0, eng.schouten.value())


def weyl(g: ChartMetric, point, order: int = 2) -> PointTensor:
    eng = g.engine(point, max(order, 2))
    return PointTensor(g.dim, (DOWN,) * 4, 2, eng.weyl.value())


def cotton(g: ChartMetric, point, order: int = 3) -> PointTensor:
    eng = g.engine(point, max(order, 3))
    return PointTensor(g.dim, (DOWN,) * 3, 0, eng.cotton.value())


def u_tensor(g: ChartMetric, point, order: int = 4) -> PointTensor:
    eng = g.engine(point, max(order, 4))
    return PointTensor(g.dim, (DOWN,) * 4, 0, eng.u_tensor.value())


def bach(g: ChartMetric, point, order: int = 4) -> PointTensor:
    eng = g.engine(point, max(order, 4))
    return PointTensor(g.dim, (DOWN, DOWN), -2, eng.bach.value())


def covariant_derivative(f: JetField, g: ChartMetric, point, k: int = 1) -> JetField:
    """k-th iterated covariant derivative of a field given as jets at ``point``."""
    eng = g.engine(point, f.order)
    out = f
    for _ in range(k):
        out = eng.covd(out)
    return out


@dataclass(frozen=True, eq=False)
class CurvaturePack:
    """Point values of the full curvature family of one metric at one point."""

    point: tuple[float, ...]
    metric: MetricAtPoint
    gamma: PointTensor
    riem: PointTensor
    ric: PointTensor
    scal: float
    schouten: PointTensor
    weyl: PointTensor
    cotton: PointTensor
    u: PointTensor
    bach: PointTensor


def curvature_pack(g: ChartMetric, point, order: int = 4) -> CurvaturePack:
    eng = g.engine(point, max(order, 4))
    return CurvaturePack(
        point=tuple(float(c) for c in point),
        metric=eng.metric,
        gamma=PointTensor(g.dim, (UP, DOWN, DOWN), 0, eng.gamma.value()),
        riem=PointTensor(g.dim, (DOWN,) * 4, 2, eng.riem.value()),
        ric=PointTensor(g.dim, (DOWN, DOWN), 0, eng.ric.value()),
        scal=float(eng.scal.value()),
        schouten=PointTensor(g.dim, (DOWN, DOWN), 0, eng.schouten.value()),
        weyl=PointTensor(g.dim, (DOWN,) * 4, 2, eng.weyl.value()),
        cotton=PointTensor(g.dim, (DOWN,) * 3, 0, eng.cotton.value()),
        u=PointTensor(g.dim, (DOWN,) * 4, 0, eng.u_tensor.value()),
        bach=PointTensor(g.dim, (DOWN, DOWN), -2, eng.bach.value()),
    )


# ---------------------------------------------------------------------------
# generic-metric identities (hold for every pseudo-Riemannian metric)
# ---------------------------------------------------------------------------

def bianchi_contraction_sides(eng: CurvatureEngine):
    """Sides of nabla^E R_EABC = 2 nabla_[B Ric_C]A (contracted Bianchi)."""
    dr = eng.covd_array(eng.riem, (DOWN,) * 4)  # (f, e, a, b, c)
    raised = jdot(eng.ginv.truncate(dr.order), dr, 1, 0)  # (x, e, a, b, c)
    lhs = jtrace(raised, 0, 1).value()  # (a, b, c)
    dric = eng.covd_array(eng.ric, (DOWN, DOWN)).value()  # (x, y, z) = nabla_x Ric_yz
    rhs = np.einsum("bca->abc", dric) - np.einsum("cba->abc", dric)
    return lhs, rhs


def psi_quadratic(riem: np.ndarray, ric: np.ndarray, ginv: np.ndarray) -> np.ndarray:
    """Quadratic curvature correction in the Laplacian of the curvature.

    Derivation: write nabla_E R_ABCD = nabla_A R_EBCD - nabla_B R_EACD by the
    second Bianchi identity, apply nabla^E, and commute it past nabla_A and
    nabla_B.  The contracted Bianchi identity turns the derivative pieces
    into second derivatives of the Ricci tensor; the commutators acting on
    the four curvature slots leave

        Psi_ABCD =   Ric_A^I R_IBCD
                   - (R^E_A^I_B R_EICD + R^E_A^I_C R_EBID + R^E_A^I_D R_EBCI)
                   - (A <-> B).
    """
    ric_up = np.einsum("ij,aj->ai", ginv, ric)
    rud = np.einsum("ex,iy,xayb->eaib", ginv, ginv, riem)  # R^E_A^I_B

    def half():
        t1 = np.einsum("ai,ibcd->abcd", ric_up, riem)
        t2 = np.einsum("eaib,eicd->abcd", rud, riem)
        t3 = np.einsum("eaic,ebid->abcd", rud, riem)
        t4 = np.einsum("eaid,ebci->abcd", rud, riem)
        return t1 - t2 - t3 - t4

    h = half()
    return h - np.transpose(h, (1, 0, 2, 3))


def laplacian_riemann_sides(eng: CurvatureEngine):
    """Sides of: Lap R_ABCD = 2(nabla_A nabla_[C Ric_D]B - nabla_B nabla_[C Ric_D]A) + Psi."""
    lhs = eng.laplacian(JetField(eng.riem, (DOWN,) * 4)).value()
    ddric = eng.covd_array(eng.covd_array(eng.ric, (DOWN, DOWN)), (DOWN,) * 3).value()
    sk = np.einsum("acdb->abcd", ddric) - np.einsum("adcb->abcd", ddric)
    rhs = sk - np.transpose(sk, (1, 0, 2, 3))
    psi = psi_quadratic(eng.riem.value(), eng.ric.value(), eng.ginv.value())
    return lhs, rhs + psi


def laplacian_commutator_sides(eng: CurvatureEngine, phi: JetField):
    """Sides of the commutator [Lap, nabla_C] Phi for an all-covariant field.

    The right-hand side carries one curvature/Ricci correction per index of
    Phi plus a single Ric . grad Phi term; output layout is (C, indices of Phi).
    """
    if any(v != DOWN for v in phi.variances):
        raise ValueError("commutator helper expects an all-covariant field")
    lhs = eng.laplacian(eng.covd(phi)).value() - eng.covd(eng.laplacian(phi)).value()

    ginv = eng.ginv.value()
    ric = eng.ric.value()
    rm = eng.riem_mixed.value()  # rm[e, c, f, a] = R_ec^f_a
    dric = eng.covd_array(eng.ric, (DOWN, DOWN)).value()
    dphi = eng.covd(phi).data.value()
    phival = phi.value()
    rank = phi.rank
    dphi_up = np.einsum("ex,x...->e...", ginv, dphi)

    rhs = np.zeros_like(lhs)
    for s in range(rank):
        phi_raised = np.moveaxis(
            np.einsum("ij,j...->i...", ginv, np.moveaxis(phival, s, 0)), 0, s
        )
        pf = np.moveaxis(phi_raised, s, 0)  # (F, other indices)
        d1 = np.einsum("f...,fac->a...c", pf, dric)
        d2 = np.einsum("f...,afc->a...c", pf, dric)
        term1 = -(d1 - d2)  # (A_s, others, C)
        term1 = np.moveaxis(term1, 0, s)  # indices restored, C last
        rhs += np.moveaxis(term1, -1, 0)

        dphis = np.moveaxis(dphi_up, 1 + s, 1)  # (E, F, others)
        t2 = np.einsum("ecfa,ef...->ca...", rm, dphis)
        rhs += -2.0 * np.moveaxis(t2, 1, 1 + s)

    rhs += np.einsum("ce,e...->c...", ric, dphi_up)
    return lhs, rhs
