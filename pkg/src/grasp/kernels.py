"""Backend selection for the convolution kernels.

The compiled extension is used when it was built; otherwise (or when
``GRASP_BACKEND=python``) the numpy implementation is used. Both give
bit-identical results.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("GRASP_BACKEND", "").lower() == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.NAME


def backends():
    """Every importable backend module, compiled first."""
    found = []
    try:
        from . import _kernels
        found.append(_kernels)
    except ImportError:
        pass
    found.append(_kernels_py)
    return found


def correlate_depthwise(x, k, impl=None):
    impl = impl or _impl
    return impl.correlate_depthwise(np.ascontiguousarray(x, dtype=np.float64),
                                    np.ascontiguousarray(k, dtype=np.float64))


def conv_multi(x, w, impl=None):
    impl = impl or _impl
    return impl.conv_multi(np.ascontiguousarray(x, dtype=np.float64),
                           np.ascontiguousarray(w, dtype=np.float64))
