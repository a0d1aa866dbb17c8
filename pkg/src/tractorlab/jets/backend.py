"""Kernel backend selection.

The compiled extension is preferred when importable; set
``TRACTORLAB_JET_BACKEND=python`` or ``=cython`` to force a choice (the
benchmark harness uses this to compare both).
"""

from __future__ import annotations

import os

from . import _kern_py

_choice = os.environ.get("TRACTORLAB_JET_BACKEND", "auto").lower()

_compiled = None
if _choice in ("auto", "cython"):
    try:
        from . import _jetkern as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None
        if _choice == "cython":
            raise

if _compiled is not None:
    BACKEND = "cython"

    def mul_rows(a, b, out, table):
        _compiled.mul_rows(a, b, out, table.ii, table.jj, table.kk)

    def mul_rows_single(a, b, out, table):
        _compiled.mul_rows_single(a, b, out, table.ii, table.jj, table.kk)

else:
    BACKEND = "python"

    def mul_rows(a, b, out, table):
        _kern_py.mul_rows(a, b, out, table.ii, table.jj, table.kk, table.starts, table.targets)

    def mul_rows_single(a, b, out, table):
        _kern_py.mul_rows_single(a, b, out, table.ii, table.jj, table.kk, table.starts, table.targets)


def backend_name() -> str:
    return BACKEND
