"""Multi-index bases and precomputed index tables for truncated jet arithmetic.

A jet of order ``K`` in ``dim`` variables stores one coefficient per
multi-index of total degree <= K.  Multi-indices are enumerated in graded
lexicographic order, so the basis of order ``K' < K`` is a prefix of the
basis of order ``K`` and truncation is a slice.

All tables are cached per ``(dim, order)`` and shared; they are read-only
after construction, so concurrent use from worker threads is safe.
"""

from __future__ import annotations

import itertools
import math
import threading

import numpy as np

_lock = threading.RLock()
_basis_cache: dict[tuple[int, int], tuple[tuple[int, ...], ...]] = {}
_index_cache: dict[tuple[int, int], dict[tuple[int, ...], int]] = {}
_mul_cache: dict[tuple[int, int], "MulTable"] = {}
_diff_cache: dict[tuple[int, int], list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {}
_promote_cache: dict[tuple[int, int, int, int], np.ndarray] = {}


def basis_size(dim: int, order: int) -> int:
    return math.comb(dim + order, order)


def _monomials_of_degree(dim: int, degree: int):
    # lexicographic enumeration of compositions of `degree` into `dim` parts
    if dim == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _monomials_of_degree(dim - 1, degree - first):
            yield (first,) + rest


def basis(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices of length ``dim`` and total degree <= ``order``, graded-lex."""
    key = (dim, order)
    with _lock:
        if key not in _basis_cache:
            out = []
            for deg in range(order + 1):
                out.extend(_monomials_of_degree(dim, deg))
            _basis_cache[key] = tuple(out)
        return _basis_cache[key]


def index_of(dim: int, order: int) -> dict[tuple[int, ...], int]:
    key = (dim, order)
    with _lock:
        if key not in _index_cache:
            _index_cache[key] = {m: i for i, m in enumerate(basis(dim, order))}
        return _index_cache[key]


class MulTable:
    """Sparse product table: ``c[kk[t]] += a[ii[t]] * b[jj[t]]``.

    Entries are sorted by target index ``kk``; ``starts``/``targets`` give the
    segment layout used by the reduceat-based fallback kernel.
    """

    __slots__ = ("ii", "jj", "kk", "starts", "targets", "nb")

    def __init__(self, dim: int, order: int):
        bas = basis(dim, order)
        idx = index_of(dim, order)
        degs = [sum(m) for m in bas]
        ii, jj, kk = [], [], []
        for i, mi in enumerate(bas):
            di = degs[i]
            for j, mj in enumerate(bas):
                if di + degs[j] > order:
                    continue
                ii.append(i)
                jj.append(j)
                kk.append(idx[tuple(x + y for x, y in zip(mi, mj))])
        order_perm = np.argsort(np.asarray(kk), kind="stable")
        self.ii = np.asarray(ii, dtype=np.int64)[order_perm]
        self.jj = np.asarray(jj, dtype=np.int64)[order_perm]
        self.kk = np.asarray(kk, dtype=np.int64)[order_perm]
        change = np.flatnonzero(np.diff(self.kk)) + 1
        self.starts = np.concatenate(([0], change)).astype(np.int64)
        self.targets = self.kk[self.starts]
        self.nb = len(bas)


def mul_table(dim: int, order: int) -> MulTable:
    key = (dim, order)
    with _lock:
        if key not in _mul_cache:
            _mul_cache[key] = MulTable(dim, order)
        return _mul_cache[key]


def diff_table(dim: int, order: int):
    """Per-coordinate arrays ``(src, dst, coef)`` realizing d/dx_v on coefficients.

    The derivative of the coefficient vector ``c`` is
    ``out[dst] = coef * c[src]`` with every other entry zero; the result is a
    valid jet of order ``order - 1``.
    """
    key = (dim, order)
    with _lock:
        if key not in _diff_cache:
            bas = basis(dim, order)
            idx_lower = index_of(dim, order - 1) if order > 0 else {}
            tables = []
            for v in range(dim):
                src, dst, coef = [], [], []
                for i, m in enumerate(bas):
                    if m[v] == 0:
                        continue
                    lowered = list(m)
                    lowered[v] -= 1
                    src.append(i)
                    dst.append(idx_lower[tuple(lowered)])
                    coef.append(float(m[v]))
                tables.append(
                    (
                        np.asarray(src, dtype=np.int64),
                        np.asarray(dst, dtype=np.int64),
                        np.asarray(coef, dtype=np.float64),
                    )
                )
            _diff_cache[key] = tables
        return _diff_cache[key]


def promote_table(dim_from: int, dim_to: int, offset: int, order: int) -> np.ndarray:
    """Index map embedding variables ``0..dim_from-1`` at ``offset`` in ``dim_to`` vars."""
    if offset + dim_from > dim_to:
        raise ValueError("promotion does not fit in target dimension")
    key = (dim_from, dim_to, offset, order)
    with _lock:
        if key not in _promote_cache:
            idx_to = index_of(dim_to, order)
            table = np.empty(basis_size(dim_from, order), dtype=np.int64)
            for i, m in enumerate(basis(dim_from, order)):
                big = [0] * dim_to
                big[offset : offset + dim_from] = m
                table[i] = idx_to[tuple(big)]
            _promote_cache[key] = table
        return _promote_cache[key]
