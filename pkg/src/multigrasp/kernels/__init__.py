"""Hot kernels with two interchangeable backends.

``MULTIGRASP_BACKEND=numpy`` selects the vectorized numpy path; anything else
(the default) uses the numba-compiled loops when numba imports, falling back
to numpy otherwise. Both backends expose the same functions::

    col2im, maxpool2_forward, maxpool2_backward, roi_pool_forward,
    roi_pool_backward, warp_bilinear, nms, rect_jaccard_batch
"""
import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

ENV_FLAG = "MULTIGRASP_BACKEND"
_FUNCS = (
    "col2im",
    "maxpool2_forward",
    "maxpool2_backward",
    "roi_pool_forward",
    "roi_pool_backward",
    "warp_bilinear",
    "nms",
    "rect_jaccard_batch",
)


def get_backend(name):
    """Return the kernel module for ``name`` ("numba" or "numpy")."""
    if name == "numpy":
        return _numpy
    if name == "numba":
        from . import _numba
        return _numba
    raise ValueError(f"unknown kernel backend {name!r}")


def _select():
    want = os.environ.get(ENV_FLAG, "numba").strip().lower()
    if want == "numpy":
        return _numpy
    try:
        return get_backend("numba")
    except ImportError:
        log.warning("numba unavailable, using numpy kernels")
        return _numpy


_impl = _select()
BACKEND = _impl.NAME

col2im = _impl.col2im
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward
roi_pool_forward = _impl.roi_pool_forward
roi_pool_backward = _impl.roi_pool_backward
warp_bilinear = _impl.warp_bilinear
nms = _impl.nms
rect_jaccard_batch = _impl.rect_jaccard_batch

__all__ = ["BACKEND", "ENV_FLAG", "get_backend", *_FUNCS]
