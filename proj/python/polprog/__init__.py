"""Policy progression regression, attribution and reporting.

Thin Python surface over the C++ core. Everything heavy happens in ``_polprog``.
"""

from ._polprog import *  # noqa: F401,F403
from ._polprog import (  # noqa: F401
    ConvergenceError,
    Error,
    FeatureGroup,
    ModelKind,
    Representation,
    ShapMethod,
    ValidationError,
)

__version__ = "0.1.0"
