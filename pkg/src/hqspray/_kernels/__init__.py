"""Hot inner loops: movement advance, pairwise range test, Gini split scan.

The compiled extension is used when it was built; otherwise the numpy
reference implementation is loaded. Set ``HQSPRAY_PURE_PYTHON=1`` to force
the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("HQSPRAY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

advance = _impl.advance
range_pairs = _impl.range_pairs
split_scan = _impl.split_scan

__all__ = ["BACKEND", "advance", "range_pairs", "split_scan"]
