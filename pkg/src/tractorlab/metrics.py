"""Builtin metrics, seeded random metrics, and the metric-spec file format.

Spec files are JSON documents:

    {"dimension": 5, "signature": [5, 0], "kind": "polynomial",
     "params": {"seed": 3, "epsilon": 0.1, "degree": 2}, "label": "rand5"}

``kind`` is one of ``flat``, ``sphere_stereographic``, ``polynomial``,
``conformal_factor``.
"""

from __future__ import annotations

import itertools
import json

import numpy as np
import sympy

from .curvature import ChartMetric, coords


def flat(dim: int, signature: tuple[int, int] | None = None) -> ChartMetric:
    if signature is None:
        signature = (dim, 0)
    p, q = signature
    if p + q != dim:
        raise ValueError("signature does not match dimension")
    diag = [1] * p + [-1] * q
    comps = tuple(
        tuple(sympy.Integer(diag[i]) if i == j else sympy.Integer(0) for j in range(dim))
        for i in range(dim)
    )
    return ChartMetric(dim, signature, comps, label=f"flat{dim}")


def sphere_stereographic(dim: int) -> ChartMetric:
    """Unit round sphere in a stereographic chart: g = 4 delta / (1 + |x|^2)^2."""
    xs = coords(dim)
    conf = 4 / (1 + sum(x**2 for x in xs)) ** 2
    comps = tuple(
        tuple(conf if i == j else sympy.Integer(0) for j in range(dim)) for i in range(dim)
    )
    return ChartMetric(dim, (dim, 0), comps, label=f"sphere{dim}")


def polynomial(
    dim: int,
    seed: int = 0,
    epsilon: float = 0.1,
    degree: int = 2,
    signature: tuple[int, int] | None = None,
) -> ChartMetric:
    """Seeded perturbation g = eta + epsilon * Q(x), Q symmetric polynomial.

    Coefficients are uniform in [-1, 1]; epsilon = 0.1 keeps the metric
    nondegenerate on the unit box.
    """
    if signature is None:
        signature = (dim, 0)
    p, q = signature
    diag = [1] * p + [-1] * q
    rng = np.random.default_rng(seed)
    xs = coords(dim)
    monomials = [sympy.Integer(1)]
    for deg in range(1, degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), deg):
            mono = sympy.Integer(1)
            for v in combo:
                mono *= xs[v]
            monomials.append(mono)
    comps = [[None] * dim for _ in range(dim)]
    for i in range(dim):
        for j in range(i, dim):
            poly = sum(float(rng.uniform(-1, 1)) * m for m in monomials)
            entry = sympy.Integer(diag[i]) if i == j else sympy.Integer(0)
            entry = entry + sympy.Float(epsilon) * poly
            comps[i][j] = entry
            comps[j][i] = entry
    return ChartMetric(dim, signature, tuple(tuple(r) for r in comps), label=f"poly{dim}s{seed}")


def random_positive_factor(dim: int, seed: int = 0, amplitude: float = 0.1):
    """Random positive polynomial 1 + a.x + Q(x,x) used as a rescaling factor."""
    rng = np.random.default_rng(seed)
    xs = coords(dim)
    lin = sum(float(rng.uniform(-amplitude, amplitude)) * x for x in xs)
    quad = sum(
        float(rng.uniform(-amplitude, amplitude)) * xs[i] * xs[j]
        for i in range(dim)
        for j in range(i, dim)
    )
    return 1 + lin + quad


def einstein_product_s2xs3() -> ChartMetric:
    """S^2(1) x S^3(sqrt 2): Einstein, not conformally flat, dim 5.

    Both factors in stereographic charts; Einstein constant 1 for each.
    """
    xs = coords(5)
    r2 = 4 / (1 + xs[0] ** 2 + xs[1] ** 2) ** 2
    # radius-b sphere: g = 4 b^2 delta / (1 + |x|^2)^2 has Ric = (k-1)/b^2 g
    r3 = 8 / (1 + xs[2] ** 2 + xs[3] ** 2 + xs[4] ** 2) ** 2
    comps = [[sympy.Integer(0)] * 5 for _ in range(5)]
    for i in range(2):
        comps[i][i] = r2
    for i in range(2, 5):
        comps[i][i] = r3
    return ChartMetric(5, (5, 0), tuple(tuple(r) for r in comps), label="s2xs3")


BUILTINS = ("flat", "sphere", "polynomial", "s2xs3")


def builtin(name: str, dim: int = 5, seed: int = 0) -> ChartMetric:
    if name == "flat":
        return flat(dim)
    if name == "sphere":
        return sphere_stereographic(dim)
    if name == "polynomial":
        return polynomial(dim, seed=seed)
    if name == "s2xs3":
        return einstein_product_s2xs3()
    raise ValueError(f"unknown builtin metric '{name}' (choose from {BUILTINS})")


def from_spec(spec: dict) -> ChartMetric:
    """Build a ChartMetric from a parsed spec document."""
    try:
        dim = int(spec["dimension"])
        signature = tuple(int(s) for s in spec["signature"])
        kind = spec["kind"]
        params = spec.get("params", {})
        label = spec.get("label", kind)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed metric spec: {exc}") from exc
    if signature[0] + signature[1] != dim:
        raise ValueError("signature does not sum to dimension")

    if kind == "flat":
        g = flat(dim, signature)
    elif kind == "sphere_stereographic":
        g = sphere_stereographic(dim)
    elif kind == "polynomial":
        g = polynomial(
            dim,
            seed=int(params.get("seed", 0)),
            epsilon=float(params.get("epsilon", 0.1)),
            degree=int(params.get("degree", 2)),
            signature=signature,
        )
    elif kind == "conformal_factor":
        base = from_spec(params["base"]) if isinstance(params.get("base"), dict) else builtin(
            params.get("base", "flat"), dim
        )
        factor = sympy.sympify(params["factor"])
        if not np.isfinite(float(factor.subs({s: 0 for s in base.coords}))):
            raise ValueError("conformal factor must be finite at the origin")
        g = base.rescaled(factor)
    else:
        raise ValueError(f"unknown metric kind '{kind}'")
    g.label = label
    return g


def load_spec(path: str) -> ChartMetric:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("metric spec must be a JSON object")
    return from_spec(doc)


def resolve_metric(name_or_path: str, dim: int = 5, seed: int = 0) -> ChartMetric:
    """CLI entry: 'builtin:NAME' or a path to a JSON spec file."""
    if name_or_path.startswith("builtin:"):
        return builtin(name_or_path.split(":", 1)[1], dim=dim, seed=seed)
    return load_spec(name_or_path)


def sample_points(dim: int, count: int, seed: int = 0, box: float = 0.4) -> list[tuple[float, ...]]:
    """Deterministic evaluation points in the box [-box, box]^dim."""
    rng = np.random.default_rng(seed)
    return [tuple(float(c) for c in rng.uniform(-box, box, size=dim)) for _ in range(count)]
