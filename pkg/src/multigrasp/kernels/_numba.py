"""numba-compiled kernels.

Loads a private copy of ``_loops`` and swaps every function in it for an
``njit`` dispatcher, so helpers called from other kernels resolve to compiled
code while the plain-Python module stays importable for the numpy backend.
"""
import importlib.util
import types

from numba import njit

NAME = "numba"


def _compiled_loops():
    spec = importlib.util.find_spec("multigrasp.kernels._loops")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    for name, obj in list(vars(mod).items()):
        if isinstance(obj, types.FunctionType) and obj.__module__ == mod.__name__:
            setattr(mod, name, njit(cache=True)(obj))
    return mod


_k = _compiled_loops()

col2im = _k.col2im
maxpool2_forward = _k.maxpool2_forward
maxpool2_backward = _k.maxpool2_backward
roi_pool_forward = _k.roi_pool_forward
roi_pool_backward = _k.roi_pool_backward
warp_bilinear = _k.warp_bilinear
nms = _k.nms
rect_jaccard_batch = _k.rect_jaccard_batch
