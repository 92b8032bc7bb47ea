import math

import numpy as np
import pytest

from _oracles import log_softmax_row
from multigrasp import autodiff as ad
from multigrasp import gradsuite
from multigrasp.autodiff import checkpoint
from multigrasp.errors import IncompatibleCheckpoint, LabelOutOfRange, ShapeMismatch


def P(v):
    return ad.parameter(np.asarray(v, dtype=np.float64))


def test_leaf_gradients_accumulate_until_zeroed():
    x = P([1.0, 2.0])
    for _ in range(2):
        ad.total(ad.scale(x, 3.0)).backward()
    assert x.grad.tolist() == [6.0, 6.0]
    x.zero_grad()
    ad.total(x).backward()
    assert x.grad.tolist() == [1.0, 1.0]


def test_shared_subexpression():
    x = P([2.0])
    y = ad.mul(x, x)
    ad.total(ad.add(y, y)).backward()
    assert x.grad.tolist() == [8.0]


def test_graph_topological_order():
    x = P([1.0])
    y = ad.scale(x, 2.0)
    z = ad.add(y, ad.mul(y, x))
    g = ad.Graph.from_output(z)
    pos = {id(n): i for i, n in enumerate(g.nodes)}
    assert pos[id(x)] < pos[id(y)] < pos[id(z)]
    assert g.output is z


def test_backward_needs_scalar_or_seed():
    x = P([1.0, 2.0])
    y = ad.scale(x, 2.0)
    with pytest.raises(ShapeMismatch):
        y.backward()
    y.backward(np.array([1.0, -1.0]))
    assert x.grad.tolist() == [2.0, -2.0]


def test_constants_get_no_gradient():
    c = ad.constant([1.0, 2.0])
    x = P([3.0, 4.0])
    ad.total(ad.mul(x, c)).backward()
    assert c.grad is None and x.grad.tolist() == [1.0, 2.0]


def test_index_scatters_with_repeats():
    x = P([1.0, 2.0, 3.0])
    ad.total(ad.index(x, np.array([0, 0, 2]))).backward()
    assert x.grad.tolist() == [2.0, 0.0, 1.0]


def test_shape_errors():
    with pytest.raises(ShapeMismatch):
        ad.add(P([1.0, 2.0]), P([1.0, 2.0, 3.0]))
    with pytest.raises(ShapeMismatch):
        ad.conv2d(P(np.zeros((1, 2, 5, 5))), P(np.zeros((3, 1, 3, 3))))
    with pytest.raises(ShapeMismatch):
        ad.affine(P(np.zeros((2, 3))), P(np.zeros((4, 5))))
    with pytest.raises(ShapeMismatch):
        ad.l1_loss(P([1.0]), [1.0, 2.0])
    with pytest.raises(ShapeMismatch):
        ad.roi_pool(P(np.zeros((2, 1, 4, 4))), np.zeros((1, 4)))


def test_conv2d_by_hand():
    x = P(np.arange(16.0).reshape(1, 1, 4, 4))
    w = P(np.ones((1, 1, 2, 2)))
    out = ad.conv2d(x, w, stride=2)
    assert out.value[0, 0].tolist() == [[10.0, 18.0], [42.0, 50.0]]


def test_softmax_cross_entropy_examples():
    z = P(np.zeros((1, 5)))
    assert ad.softmax_cross_entropy(z, [3]).item() == pytest.approx(math.log(5))
    big = P([1000.0, 0.0])
    assert ad.softmax_cross_entropy(big, 0).item() == pytest.approx(0.0, abs=1e-12)
    logits = [[1.0, 2.0, 0.5], [0.0, -1.0, 3.0]]
    want = -(log_softmax_row(logits[0])[2] + log_softmax_row(logits[1])[0]) / 2
    assert ad.softmax_cross_entropy(P(logits), [2, 0]).item() == pytest.approx(want)
    with pytest.raises(LabelOutOfRange):
        ad.softmax_cross_entropy(P(np.zeros((1, 3))), [3])


def test_l1_and_smooth_l1_examples():
    assert ad.l1_loss(P([1.0, 2.0]), [1.0, 2.0]).item() == 0.0
    assert ad.l1_loss(P([1.0, -1.0]), [0.0, 0.0]).item() == 1.0
    p = P([0.0])
    ad.l1_loss(p, [0.0]).backward()
    assert p.grad.tolist() == [0.0]
    assert ad.smooth_l1_loss(P([0.5, 3.0]), [0.0, 0.0]).item() == pytest.approx((0.125 + 2.5) / 2)


def test_pooling_examples():
    x = P(np.array([[[[1.0, 5.0, 2.0], [3.0, 4.0, 0.0], [9.0, 9.0, 9.0]]]]))
    assert ad.max_pool2d(x).value.tolist() == [[[[5.0]]]]
    g = P(np.arange(12.0).reshape(1, 3, 2, 2))
    assert ad.global_avg_pool(g).value.tolist() == [[1.5, 5.5, 9.5]]


@pytest.mark.parametrize("result", gradsuite.kernel_checks(seed=7), ids=lambda r: r.name)
def test_kernel_gradients(result):
    assert result.error < gradsuite.KERNEL_TOL


def test_gradient_check_catches_wrong_backward():
    def bad_square(x):
        def back(g):
            x.accumulate(g * x.value)  # should be 2x
        return ad.core._node(x.value ** 2, (x,), back, "bad")

    x = ad.DiffArray(np.array([1.0, 2.0]), True)
    assert ad.gradient_check(lambda a: ad.total(bad_square(a[0])), [x]) > 0.1
    with pytest.raises(TypeError):
        ad.gradient_check(lambda a: ad.total(a[0]), [ad.DiffArray(np.ones(2, np.float32), True)])


def test_step_lr():
    assert ad.step_lr(1e-4, 0) == 1e-4
    assert ad.step_lr(1e-4, 9999) == 1e-4
    assert ad.step_lr(1e-4, 10000) == pytest.approx(1e-5)
    assert ad.step_lr(1e-4, 25000) == pytest.approx(1e-6)


def test_sgd_plain_and_momentum():
    p = np.array([1.0, 2.0])
    ad.sgd_step([p], [np.array([0.5, -1.0])], 0.1)
    assert p.tolist() == pytest.approx([0.95, 2.1])
    q = np.array([0.0])
    v = [np.zeros(1)]
    for _ in range(2):
        ad.sgd_step([q], [np.array([1.0])], 0.1, momentum=0.9, velocity=v)
    assert q[0] == pytest.approx(-0.1 - 0.19)
    with pytest.raises(ShapeMismatch):
        ad.sgd_step([p], [np.zeros(3)], 0.1)


def test_sgd_optimizer_schedule():
    x = P([1.0])
    opt = ad.SGD([x], lr=1.0, lr_step=2, gamma=0.5)
    lrs = []
    for _ in range(4):
        lrs.append(opt.lr)
        opt.zero_grad()
        ad.total(x).backward()
        opt.step()
    assert lrs == [1.0, 1.0, 0.5, 0.5]
    assert x.value[0] == pytest.approx(1.0 - 3.0)


def test_checkpoint_roundtrip(tmp_path, rng):
    params = {"a": rng.normal(size=(2, 3)).astype(np.float32), "b.bias": np.float32(rng.normal(size=4)),
              "scalar": np.float32(2.5)}
    meta = {"network": {"R": 19}, "note": "x"}
    blob = checkpoint.dumps(params, meta)
    assert blob[:4] == b"MGCK"
    assert checkpoint.dumps(params, meta) == blob
    back, m = checkpoint.loads(blob)
    assert m == meta and list(back) == list(params)
    for k in params:
        assert np.array_equal(back[k], params[k])
    checkpoint.save(tmp_path / "c.mgck", params, meta)
    assert checkpoint.load(tmp_path / "c.mgck")[1] == meta


@pytest.mark.parametrize("mutate", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:4] + b"\x02\x00" + b[6:],
    lambda b: b[:-1],
    lambda b: b + b"\x00",
    lambda b: b[:10] + b"\xff" + b[11:],
])
def test_checkpoint_corruption(mutate):
    blob = checkpoint.dumps({"a": np.ones((2, 2), np.float32)}, {"k": 1})
    with pytest.raises(IncompatibleCheckpoint):
        checkpoint.loads(mutate(blob))
