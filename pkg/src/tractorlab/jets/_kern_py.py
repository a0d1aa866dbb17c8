"""Pure NumPy fallback kernels for jet coefficient multiply-accumulate.

Same contracts as the compiled ``_jetkern`` extension.  Products are formed
pairwise through the sorted multiplication table and reduced per target
coefficient with ``np.add.reduceat``; rows are chunked to bound the size of
the intermediate pair array.
"""

from __future__ import annotations

import numpy as np

# cap on rows*table_entries floats materialized at once (~256 MB)
_CHUNK_BUDGET = 32_000_000


def _row_chunks(nrow: int, ntab: int):
    step = max(1, _CHUNK_BUDGET // max(1, ntab))
    for lo in range(0, nrow, step):
        yield lo, min(nrow, lo + step)


def mul_rows(a, b, out, ii, jj, kk, starts=None, targets=None):
    """out[m, kk[t]] += a[m, ii[t]] * b[m, jj[t]] for every row m."""
    if starts is None:
        starts, targets = _segments(kk)
    for lo, hi in _row_chunks(a.shape[0], len(ii)):
        pair = a[lo:hi, ii] * b[lo:hi, jj]
        out[lo:hi, targets] += np.add.reduceat(pair, starts, axis=1)


def mul_rows_single(a, b, out, ii, jj, kk, starts=None, targets=None):
    """out[m, kk[t]] += a[ii[t]] * b[m, jj[t]] for every row m."""
    if starts is None:
        starts, targets = _segments(kk)
    av = a[ii]
    for lo, hi in _row_chunks(b.shape[0], len(ii)):
        pair = av * b[lo:hi, jj]
        out[lo:hi, targets] += np.add.reduceat(pair, starts, axis=1)


def _segments(kk):
    change = np.flatnonzero(np.diff(kk)) + 1
    starts = np.concatenate(([0], change))
    return starts, kk[starts]
