"""Kernel dispatch: compiled extension when built, NumPy fallback otherwise.

Set ``EDGEVIEW_PURE=1`` to force the fallback (used by the benchmark and
by the parity tests).
"""

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("EDGEVIEW_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
else:
    _compiled = None

if _compiled is not None:
    svec_rows = _compiled.svec_rows
    joint_diagonalize = _compiled.joint_diagonalize
    BACKEND = "cython"
else:
    svec_rows = _kernels_py.svec_rows
    joint_diagonalize = _kernels_py.joint_diagonalize

__all__ = ["BACKEND", "svec_rows", "joint_diagonalize"]
