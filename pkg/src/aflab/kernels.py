"""Backend selection for the stencil kernels.

The compiled ``_ckernels`` extension is used when it is importable; otherwise
the numpy fallback in ``_pykernels`` is used. Setting ``AFLAB_PURE_PYTHON=1``
forces the fallback.
"""
import os

from aflab import _pykernels

python_backend = _pykernels

if os.environ.get("AFLAB_PURE_PYTHON", "") not in ("", "0"):
    compiled_backend = None
else:
    try:
        from aflab import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = backend.BACKEND
