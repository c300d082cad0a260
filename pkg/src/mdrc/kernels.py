"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it imports; otherwise, or
when ``MDRC_PURE_PYTHON=1`` is set, the numpy implementations are used.
"""

import os

from . import _pykernels

if os.environ.get("MDRC_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

grde_backward = _impl.grde_backward
grde_stationary = _impl.grde_stationary
feedforward_backward = _impl.feedforward_backward
simulate_affine = _impl.simulate_affine

python = _pykernels
