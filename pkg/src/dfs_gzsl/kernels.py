"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy fallback in ``_kernels_py`` is used. Setting ``DFS_GZSL_PURE_PYTHON=1``
forces the fallback. ``BACKEND`` names the active choice.
"""

import os

from . import _kernels_py

if os.environ.get("DFS_GZSL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

l1_rows = _impl.l1_rows
kl_rows = _impl.kl_rows
w2_rows = _impl.w2_rows
softmax_xent_rows = _impl.softmax_xent_rows
adam_update = _impl.adam_update

__all__ = [
    "BACKEND",
    "l1_rows",
    "kl_rows",
    "w2_rows",
    "softmax_xent_rows",
    "adam_update",
]
