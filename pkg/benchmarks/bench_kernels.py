"""Time every hot kernel under the numba and numpy backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once untimed (numba compiles on first call), then the best
of N timed runs is reported. Outputs of the two backends are compared so a
speedup never hides a wrong answer.
"""
import argparse
import time

import numpy as np

from multigrasp.kernels import get_backend


def cases(rng):
    """(name, args builder) pairs sized like one training step of the toy detector."""
    feat = rng.normal(size=(32, 14, 14))
    x1 = rng.uniform(0, 150, size=(64, 2))
    rois = np.hstack([x1, x1 + rng.uniform(10, 70, size=(64, 2))])
    pooled = rng.normal(size=(64, 32, 7, 7))
    conv_in = rng.normal(size=(1, 16, 56, 56))
    dpool = rng.normal(size=(1, 16, 28, 28))
    dcols = rng.normal(size=(1, 56, 56, 16, 3, 3))
    img = rng.uniform(0, 255, size=(480, 640, 3))
    minv = np.array([[0.9, -0.2, 40.0], [0.2, 0.9, 10.0], [0.0, 0.0, 1.0]])
    boxes = np.vstack([np.hstack([x1, x1 + 40.0])] * 5) + rng.normal(0, 3, size=(320, 4))
    order = rng.permutation(len(boxes)).astype(np.int64)
    ra = np.column_stack([rng.uniform(0, 100, (1000, 2)), rng.uniform(0, 180, 1000), rng.uniform(5, 40, (1000, 2))])
    rb = ra + np.column_stack([rng.normal(0, 5, (1000, 2)), rng.normal(0, 20, 1000), np.zeros((1000, 2))])

    return [
        ("col2im", lambda k: (dcols, 1, 16, 56, 56, 3, 3, 1, 1)),
        ("maxpool2_forward", lambda k: (conv_in,)),
        ("maxpool2_backward", lambda k: (dpool, k.maxpool2_forward(conv_in)[1], 56, 56)),
        ("roi_pool_forward", lambda k: (feat, rois, 7, 7, 1.0 / 16)),
        ("roi_pool_backward", lambda k: (pooled, k.roi_pool_forward(feat, rois, 7, 7, 1.0 / 16)[1], 14, 14)),
        ("warp_bilinear", lambda k: (img, minv, 227, 227)),
        ("nms", lambda k: (boxes, order, 0.5)),
        ("rect_jaccard_batch", lambda k: (ra, rb)),
    ]


def best_time(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t)
    return best


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = {name: get_backend(name) for name in ("numba", "numpy")}
    print(f"{'kernel':<22} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}  match")
    for name, build in cases(np.random.default_rng(0)):
        t, outs = {}, {}
        for bname, mod in backends.items():
            fn = getattr(mod, name)
            a = build(mod)
            t[bname] = best_time(fn, a, args.repeat)
            outs[bname] = fn(*a)
        same = _same(outs["numba"], outs["numpy"])
        print(f"{name:<22} {t['numba'] * 1e3:>10.3f} {t['numpy'] * 1e3:>10.3f} "
              f"{t['numpy'] / t['numba']:>8.1f}  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
