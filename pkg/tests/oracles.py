"""Independent numerical oracles used by the test suite.

Everything here differentiates *callables* by central finite differences
(with one Richardson step), or manipulates explicit coefficient lists, so
none of it shares code with the jet-based paths it checks.
"""

from __future__ import annotations

import numpy as np


def partial_fd(f, x, m, h=1e-3, levels=1):
    """m-th mixed partial of callable ``f`` at ``x`` by nested central differences.

    ``levels`` Richardson extrapolation steps per derivative; two levels give
    O(h^6) truncation, needed for clean 3rd/4th derivatives.
    """
    x = np.asarray(x, dtype=float)
    m = list(m)
    for v, e in enumerate(m):
        if e > 0:
            break
    else:
        return f(x)
    mm = m.copy()
    mm[v] -= 1

    def g(y):
        return partial_fd(f, y, mm, h, levels)

    def diff(step):
        xp = x.copy()
        xm = x.copy()
        xp[v] += step
        xm[v] -= step
        return (g(xp) - g(xm)) / (2.0 * step)

    estimates = [diff(h / 2**k) for k in range(levels + 1)]
    for lev in range(1, levels + 1):
        factor = 4.0**lev
        estimates = [
            (factor * estimates[k + 1] - estimates[k]) / (factor - 1.0)
            for k in range(len(estimates) - 1)
        ]
    return estimates[0]


def gradient_fd(f, x, h=1e-3):
    """All first partials of callable ``f`` (may return arrays) at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for v in range(len(x)):
        m = [0] * len(x)
        m[v] = 1
        cols.append(partial_fd(f, x, m, h))
    return np.array(cols)


def poly1d_mul(a, b, order):
    """Coefficient-list product of univariate truncated series (brute force)."""
    out = [0.0] * (order + 1)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            if i + j <= order:
                out[i + j] += ai * bj
    return out


def poly1d_reciprocal(b, order):
    """Series of 1/b by explicit long division (b[0] != 0)."""
    out = [1.0 / b[0]]
    for k in range(1, order + 1):
        acc = 0.0
        for j in range(1, min(k, len(b) - 1) + 1):
            acc += b[j] * out[k - j]
        out.append(-acc / b[0])
    return out


def loop_contract(values, slot_a, slot_b):
    """Trace of a dense array over two slots by explicit Python loops."""
    values = np.asarray(values)
    rank = values.ndim
    dim = values.shape[0]
    keep = [s for s in range(rank) if s not in (slot_a, slot_b)]
    out = np.zeros(tuple(values.shape[s] for s in keep))
    for idx in np.ndindex(*values.shape):
        if idx[slot_a] != idx[slot_b]:
            continue
        out[tuple(idx[s] for s in keep)] += values[idx]
    return out
