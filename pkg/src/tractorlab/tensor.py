"""Dense pointwise tensors with index variance and conformal-weight tags.

Slots are positional; variances are the characters ``'u'`` (contravariant)
and ``'d'`` (covariant).  The weight tag is bookkeeping over homogeneous
representatives: products add weights, plain traces preserve them, and
raising/lowering shifts by the metric's own weight (+2/-2 for a
representative of the conformal class, 0 for an ambient metric, whose
homogeneity cancels against its two indices).  Weights are never used to
rescale values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularMetricError, VarianceError

UP = "u"
DOWN = "d"


@dataclass(frozen=True, eq=False)
class PointTensor:
    """Tensor at a point: dense values plus per-slot variance and a weight tag."""

    dim: int
    slots: tuple[str, ...]
    weight: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != (self.dim,) * len(self.slots):
            raise ValueError(
                f"values shape {values.shape} inconsistent with rank {len(self.slots)} in dim {self.dim}"
            )
        if any(s not in (UP, DOWN) for s in self.slots):
            raise ValueError(f"invalid slot variances {self.slots}")

    @property
    def rank(self) -> int:
        return len(self.slots)

    @staticmethod
    def scalar(dim: int, value: float, weight: int = 0) -> "PointTensor":
        return PointTensor(dim, (), weight, np.asarray(float(value)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def __repr__(self):
        return f"PointTensor(dim={self.dim}, slots={''.join(self.slots) or '()'}, w={self.weight})"


@dataclass(frozen=True, eq=False)
class MetricAtPoint:
    """A metric and its inverse at a point, with signature and weight tag."""

    g: PointTensor
    g_inv: PointTensor
    signature: tuple[int, int]
    weight: int = 2

    def __post_init__(self):
        gv = self.g.values
        if not np.allclose(gv, gv.T, atol=1e-12):
            raise ValueError("metric not symmetric at point")
        resid = gv @ self.g_inv.values - np.eye(self.g.dim)
        if np.max(np.abs(resid)) > 1e-10:
            raise SingularMetricError("g * g_inv deviates from identity")
        eigs = np.linalg.eigvalsh(gv)
        pos = int(np.sum(eigs > 0))
        neg = int(np.sum(eigs < 0))
        if (pos, neg) != tuple(self.signature):
            raise ValueError(f"eigenvalue signs {(pos, neg)} do not match signature {self.signature}")

    @property
    def dim(self) -> int:
        return self.g.dim

    @staticmethod
    def from_values(values: np.ndarray, signature=None, weight: int = 2) -> "MetricAtPoint":
        values = np.asarray(values, dtype=float)
        dim = values.shape[0]
        if abs(np.linalg.det(values)) < 1e-10:
            raise SingularMetricError("metric determinant below 1e-10 at point")
        inv = np.linalg.inv(values)
        if signature is None:
            eigs = np.linalg.eigvalsh(values)
            signature = (int(np.sum(eigs > 0)), int(np.sum(eigs < 0)))
        g = PointTensor(dim, (DOWN, DOWN), weight, values)
        g_inv = PointTensor(dim, (UP, UP), -weight, inv)
        return MetricAtPoint(g, g_inv, tuple(signature), weight)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def contract(t: PointTensor, slot_a: int, slot_b: int) -> PointTensor:
    """Trace one up slot against one down slot; rank drops by 2, weight kept."""
    if {t.slots[slot_a], t.slots[slot_b]} != {UP, DOWN}:
        raise VarianceError(
            f"contraction needs one up and one down slot, got {t.slots[slot_a]}{t.slots[slot_b]}"
        )
    values = np.trace(t.values, axis1=slot_a, axis2=slot_b)
    slots = tuple(s for i, s in enumerate(t.slots) if i not in (slot_a, slot_b))
    return PointTensor(t.dim, slots, t.weight, values)


def _permute_values(values: np.ndarray, group: tuple[int, ...], signed: bool) -> np.ndarray:
    rank = values.ndim
    out = np.zeros_like(values)
    count = 0
    for perm in itertools.permutations(range(len(group))):
        axes = list(range(rank))
        for pos, src in zip(group, perm):
            axes[pos] = group[src]
        sign = 1.0
        if signed:
            sign = _perm_sign(perm)
        out += sign * np.transpose(values, axes)
        count += 1
    return out / count


def _perm_sign(perm) -> float:
    sign = 1.0
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _check_same_variance(t: PointTensor, group) -> None:
    variances = {t.slots[s] for s in group}
    if len(variances) > 1:
        raise VarianceError(f"(anti)symmetrization over mixed variances {variances}")


def symmetrize(t: PointTensor, group) -> PointTensor:
    group = tuple(group)
    _check_same_variance(t, group)
    return PointTensor(t.dim, t.slots, t.weight, _permute_values(t.values, group, signed=False))


def antisymmetrize(t: PointTensor, group) -> PointTensor:
    group = tuple(group)
    _check_same_variance(t, group)
    return PointTensor(t.dim, t.slots, t.weight, _permute_values(t.values, group, signed=True))


def raise_lower(t: PointTensor, slot: int, metric: MetricAtPoint) -> PointTensor:
    """Flip one slot's variance with the metric; weight shifts by +-metric.weight."""
    if t.slots[slot] == DOWN:
        mat = metric.g_inv.values
        dw = -metric.weight
        new_var = UP
    else:
        mat = metric.g.values
        dw = metric.weight
        new_var = DOWN
    values = np.tensordot(mat, t.values, axes=([1], [slot]))
    values = np.moveaxis(values, 0, slot)
    slots = t.slots[:slot] + (new_var,) + t.slots[slot + 1 :]
    return PointTensor(t.dim, slots, t.weight + dw, values)


def add(a: PointTensor, b: PointTensor) -> PointTensor:
    if (a.dim, a.slots, a.weight) != (b.dim, b.slots, b.weight):
        raise VarianceError(
            f"cannot add tensors with different (dim, slots, weight): "
            f"{(a.dim, a.slots, a.weight)} vs {(b.dim, b.slots, b.weight)}"
        )
    return PointTensor(a.dim, a.slots, a.weight, a.values + b.values)


def scale(t: PointTensor, factor: float) -> PointTensor:
    return PointTensor(t.dim, t.slots, t.weight, t.values * factor)


def outer(a: PointTensor, b: PointTensor) -> PointTensor:
    if a.dim != b.dim:
        raise ValueError("outer product across different dimensions")
    values = np.multiply.outer(a.values, b.values)
    return PointTensor(a.dim, a.slots + b.slots, a.weight + b.weight, values)


def contract_with_metric(t: PointTensor, slot_a: int, slot_b: int, metric: MetricAtPoint) -> PointTensor:
    """Contract two same-variance slots through the metric (raise one first)."""
    if t.slots[slot_a] != t.slots[slot_b]:
        return contract(t, slot_a, slot_b)
    raised = raise_lower(t, slot_a, metric)
    return contract(raised, slot_a, slot_b)
