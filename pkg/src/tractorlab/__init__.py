"""tractorlab: numerical verification of conformal tractor calculus.

Evaluates curvature and tractor objects of explicitly given metrics at
points via truncated Taylor (jet) arithmetic, builds normal-form ambient
metrics over them, and checks the identities tying the two pictures
together to numerical tolerance.
"""

__version__ = "0.1.0"

from .jets import JetArray, JetPoint, JetScalar, lift  # noqa: F401
