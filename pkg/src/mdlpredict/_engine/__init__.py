"""Engine backend selection.

Two interchangeable backends implement the hot kernels: a compiled Cython
extension and a pure-numpy fallback. The choice happens once, at import:

- ``MDLPREDICT_ENGINE=compiled`` requires the extension (ImportError if the
  build is missing),
- ``MDLPREDICT_ENGINE=python`` forces the fallback,
- unset or ``auto`` prefers the extension and falls back silently.

Both backends produce bitwise-identical arrays, so results never depend on
which one is active.
"""

from __future__ import annotations

import os

from . import encode
from .encode import EncodedBank, EncodedMeasure, bank_of

_requested = os.environ.get("MDLPREDICT_ENGINE", "auto")
if _requested not in ("auto", "compiled", "python"):
    raise ImportError(
        f"MDLPREDICT_ENGINE={_requested!r}: expected 'auto', 'compiled' or 'python'"
    )

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from . import kernels_cy as _impl
    except ImportError:
        if _requested == "compiled":
            raise
if _impl is None:
    from . import kernels_py as _impl

pred_bank = _impl.pred_bank
block_probs = _impl.block_probs
mc_block_scores = _impl.mc_block_scores
sample_path = _impl.sample_path


def backend_name() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return _impl.ENGINE_NAME


__all__ = [
    "EncodedBank",
    "EncodedMeasure",
    "backend_name",
    "bank_of",
    "block_probs",
    "encode",
    "mc_block_scores",
    "pred_bank",
    "sample_path",
]
