"""Select the compiled kernels when available, else the numpy fallback.

Set ``PLLVLE_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np


def _load():
    if os.environ.get("PLLVLE_PURE_PYTHON", "") not in ("", "0"):
        from . import _pykernels

        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        from . import _pykernels

        return _pykernels, "python"
    return _ckernels, "cython"


kernels, BACKEND = _load()


def call(name, *args, module=None):
    """Broadcast args, flatten to contiguous float64, run kernel, restore shape."""
    mod = kernels if module is None else module
    arrays = np.broadcast_arrays(*[np.asarray(a, dtype=np.float64) for a in args])
    shape = arrays[0].shape
    flat = [np.ascontiguousarray(a.ravel()) for a in arrays]
    out = getattr(mod, name)(*flat)
    if isinstance(out, tuple):
        return tuple(o.reshape(shape) for o in out)
    return out.reshape(shape)
