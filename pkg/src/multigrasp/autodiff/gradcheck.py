"""Finite-difference verification of analytic gradients."""
import numpy as np

from .core import DiffArray


def numeric_grad(fn, inputs, k, eps):
    x = inputs[k].value
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        up = float(fn(inputs).value)
        flat[i] = old - eps
        down = float(fn(inputs).value)
        flat[i] = old
        gf[i] = (up - down) / (2 * eps)
    return g


def gradient_check(fn, inputs, eps=1e-5, floor=1e-6):
    """Worst relative error between backward and central differences.

    ``fn`` maps the list ``inputs`` of float64 DiffArrays to a scalar
    DiffArray. The error per coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    """
    for x in inputs:
        if x.value.dtype != np.float64:
            raise TypeError("gradient_check needs float64 inputs")
        x.zero_grad()
    out = fn(inputs)
    out.backward()
    worst = 0.0
    for k, x in enumerate(inputs):
        if not x.requires_grad:
            continue
        analytic = x.grad if x.grad is not None else np.zeros_like(x.value)
        num = numeric_grad(fn, inputs, k, eps)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(num)), floor)
        err = np.abs(analytic - num) / denom
        if err.size:
            worst = max(worst, float(err.max()))
    return worst


def random_input(rng, shape, requires_grad=True, scale=1.0):
    return DiffArray(rng.normal(0.0, scale, size=shape), requires_grad=requires_grad)
