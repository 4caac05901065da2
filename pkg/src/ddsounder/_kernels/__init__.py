"""Synthesis kernel backend selection.

The compiled extension is preferred when importable; set ``DDSOUNDER_NO_EXT``
to any non-empty value to force the numpy fallback.  Both backends implement
the same contract and agree to floating-point round-off.
"""

import os

from . import fallback
from .fallback import interpolate_periodic

try:
    from . import _synth as _ext
except ImportError:  # extension not built
    _ext = None

if _ext is not None and not os.environ.get("DDSOUNDER_NO_EXT"):
    synthesize_paths = _ext.synthesize_paths
    BACKEND = "compiled"
else:
    synthesize_paths = fallback.synthesize_paths
    BACKEND = "numpy"

__all__ = ["synthesize_paths", "interpolate_periodic", "BACKEND"]
