"""Numerical toolkit for F-manifolds with compatible connections.

Structure constants, metrics and connections are evaluated as truncated Taylor
jets; every identity is checked as a residual against the size of its terms.
"""

__version__ = "0.1.0"

from .errors import (ConstructionError, EvaluationError, ExprSyntaxError, FmanError,  # noqa: E402
                     InapplicableSuiteError, SpecError, UnknownIdentifierError)
from .fields import Residual, TensorJet  # noqa: E402
from .jets import Jet, JetSpace  # noqa: E402
from .manifold import ManifoldSpec  # noqa: E402

__all__ = [
    "__version__", "ConstructionError", "EvaluationError", "ExprSyntaxError", "FmanError",
    "InapplicableSuiteError", "SpecError", "UnknownIdentifierError", "Residual", "TensorJet",
    "Jet", "JetSpace", "ManifoldSpec",
]
