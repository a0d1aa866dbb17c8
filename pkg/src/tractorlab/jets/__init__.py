"""Truncated multivariate Taylor arithmetic (forward jets) at a point."""

from .backend import backend_name
from .basis import basis, basis_size, index_of, mul_table
from .core import (
    JetArray,
    JetPoint,
    JetScalar,
    extract_derivative,
    get_max_order,
    jdot,
    jet_linear_solve,
    jet_matrix_inverse,
    jmul,
    jtrace,
    lift,
    set_max_order,
)

__all__ = [
    "JetArray",
    "JetPoint",
    "JetScalar",
    "backend_name",
    "basis",
    "basis_size",
    "extract_derivative",
    "get_max_order",
    "index_of",
    "jdot",
    "jet_linear_solve",
    "jet_matrix_inverse",
    "jmul",
    "jtrace",
    "lift",
    "mul_table",
    "set_max_order",
]
