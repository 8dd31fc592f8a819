"""Online sequence prediction over countable model classes.

A model class is a countable set of measures over finite-alphabet sequences,
each carrying a codelength. The package provides the two-part-code (MDL)
selector and its mixture counterparts, deterministic elimination and
weighted-majority learners, distance and log-ratio diagnostics, a
sequential decision layer on top of the same machinery, and a seeded
simulation harness that checks the theoretical regret and convergence
bounds at desk scale.

Log-probabilities are in bits throughout; probability zero is represented
as ``float('-inf')``.
"""

from . import errors
from ._engine import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "errors", "__version__"]
