"""Hot kernels with a compiled core and a numpy fallback.

The compiled extension is used when it was built and importable; setting
``COBOUNDARY_PURE_PYTHON=1`` forces the fallback. ``BACKEND`` names the
active implementation and ``set_backend`` switches it at runtime.
"""
import importlib
import os

import numpy as np

from . import _pykernels

_ckernels = None
if os.environ.get("COBOUNDARY_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        _ckernels = importlib.import_module(".._kernels._ckernels", __name__)
    except ImportError:  # extension not built
        _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"
_impl = _ckernels if _ckernels is not None else _pykernels


def _c(a):
    return np.ascontiguousarray(a, dtype=np.complex128)


def cauchy_matmul(u, v, backend=None):
    impl = _pick(backend)
    return np.asarray(impl.cauchy_matmul(_c(u), _c(v)))


def series_inverse(u, w0, backend=None):
    impl = _pick(backend)
    return np.asarray(impl.series_inverse(_c(u), _c(w0)))


def orbit_product(vals, backend=None):
    impl = _pick(backend)
    return np.asarray(impl.orbit_product(_c(vals)))


def set_backend(name):
    """Switch the default implementation (``"python"`` or ``"cython"``)."""
    global _impl, BACKEND
    _impl = _pick(name)
    BACKEND = name


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _pykernels
    if backend == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        return _ckernels
    raise ValueError(f"unknown backend {backend!r}")


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])
