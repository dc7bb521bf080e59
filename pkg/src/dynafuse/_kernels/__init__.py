"""Hot-loop kernels with a compiled core and a pure-Python fallback.

The compiled extension is preferred when importable; set
``DYNAFUSE_PURE_PYTHON=1`` to force the numpy fallback (used by the
benchmark and the parity tests).
"""

import os

if os.environ.get("DYNAFUSE_PURE_PYTHON"):
    from dynafuse._kernels import py_backend as _impl
else:
    try:
        from dynafuse._kernels import _ckernels as _impl  # type: ignore[attr-defined]
    except ImportError:
        from dynafuse._kernels import py_backend as _impl

BACKEND = _impl.BACKEND
bilinear_sample = _impl.bilinear_sample
covariance_chain = _impl.covariance_chain

__all__ = ["BACKEND", "bilinear_sample", "covariance_chain"]
