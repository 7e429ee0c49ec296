"""Kernel dispatch: compiled extension if importable, else pure Python.

Set ``POLARSCOPE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("POLARSCOPE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

random_walks = _impl.random_walks
cluster_distance_sums = _impl.cluster_distance_sums

__all__ = ["BACKEND", "random_walks", "cluster_distance_sums"]
