"""Hot-kernel backend selection.

The separable blur and the SLIC assignment sweep dominate the pipeline's
runtime, so they exist twice: a Cython extension (``_core``) and a plain
numpy fallback (``_numpy``).  The extension is picked automatically when it
has been built (``python setup_cython.py build_ext --inplace``); the
environment variable ``REVEX_KERNELS`` forces a backend:

    REVEX_KERNELS=numpy   always use the fallback
    REVEX_KERNELS=cython  require the compiled core (ImportError if missing)
    REVEX_KERNELS=auto    default behaviour
"""

import os

import numpy as np

_requested = os.environ.get("REVEX_KERNELS", "auto").lower()
if _requested not in ("auto", "cython", "numpy"):
    raise ValueError(f"REVEX_KERNELS must be auto|cython|numpy, got {_requested!r}")

_impl = None
if _requested in ("auto", "cython"):
    try:
        from . import _core as _impl
    except ImportError:
        if _requested == "cython":
            raise
        _impl = None
if _impl is None:
    from . import _numpy as _impl

BACKEND = _impl.BACKEND_NAME


def correlate1d(x, kernel, axis):
    """Correlate `x` with a 1-D kernel along `axis`, edge-replicate padded.

    Accepts any float array; returns float32 with the same shape.  The kernel
    must have odd length.
    """
    x = np.ascontiguousarray(x, dtype=np.float32)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    if kernel.ndim != 1 or kernel.shape[0] % 2 != 1:
        raise ValueError("kernel must be 1-D with odd length")
    axis = axis % x.ndim
    pre = int(np.prod(x.shape[:axis], dtype=np.int64))
    n = x.shape[axis]
    post = int(np.prod(x.shape[axis + 1:], dtype=np.int64))
    out = _impl.correlate1d_3d(x.reshape(pre, n, post), kernel)
    return out.reshape(x.shape)


def slic_assign(feat, scale_t, centers_pos, centers_feat, ratio2, radius):
    """One localized K-means assignment sweep (see backend docstrings)."""
    feat = np.ascontiguousarray(feat, dtype=np.float32)
    centers_pos = np.ascontiguousarray(centers_pos, dtype=np.float64)
    centers_feat = np.ascontiguousarray(centers_feat, dtype=np.float64)
    return _impl.slic_assign(feat, float(scale_t), centers_pos, centers_feat,
                             float(ratio2), tuple(int(r) for r in radius))
