import numpy as np
import pytest

from llicti import nnet
from llicti.nnet import ConvSpec, Tensor, adam_step, conv2d


def naive_conv(x, w, b, spec, out_hw):
    """Per-pixel loop: out[o, u, v] = b[o] + sum w[o, i, tap] * x[i, clamp(u+dr), clamp(v+dc)]."""
    cin, hi, wi = x.shape
    ho, wo = out_hw
    kh, kw = spec.kernel
    wf = w.reshape(w.shape[0], cin, kh * kw)
    out = np.empty((w.shape[0], ho, wo))
    for u in range(ho):
        for v in range(wo):
            acc = b.astype(float).copy()
            for t, (dr, dc) in enumerate(spec.tap_offsets):
                r = min(max(u + dr, 0), hi - 1)
                c = min(max(v + dc, 0), wi - 1)
                acc += wf[:, :, t] @ x[:, r, c]
            out[:, u, v] = acc
    return out


@pytest.mark.parametrize(
    "rows, cols, in_hw, out_hw",
    [
        (range(-1, 3), range(-1, 3), (5, 6), (4, 5)),
        (range(-2, 2), range(-1, 2), (3, 4), (3, 4)),
        (range(0, 1), range(0, 1), (4, 4), (4, 4)),
        (range(-1, 2), range(-2, 2), (1, 1), (1, 1)),
        (range(0, 1), range(0, 1), (4, 4), (2, 3)),
    ],
)
def test_conv_matches_loop(rng, rows, cols, in_hw, out_hw):
    spec = ConvSpec.grid(3, 5, rows, cols)
    x = rng.normal(size=(3,) + in_hw)
    w = rng.normal(size=(5, 3, len(rows), len(cols)))
    b = rng.normal(size=5)
    got = conv2d(x, Tensor(w), Tensor(b), spec, out_hw).data
    np.testing.assert_allclose(got, naive_conv(x, w, b, spec, out_hw), rtol=1e-12, atol=1e-12)


def test_conv_batch_axes(rng):
    spec = ConvSpec.grid(3, 4, range(-1, 2), range(-1, 2))
    x = rng.normal(size=(3, 2, 5, 5))
    w = rng.normal(size=(4, 3, 3, 3))
    b = rng.normal(size=4)
    out = conv2d(x, Tensor(w), Tensor(b), spec).data
    assert out.shape == (4, 2, 5, 5)
    for n in range(2):
        np.testing.assert_allclose(out[:, n], naive_conv(x[:, n], w, b, spec, (5, 5)), atol=1e-12)


def test_conv_empty_input_is_bias():
    spec = ConvSpec.grid(3, 2, range(-1, 2), range(-1, 2))
    b = np.array([0.5, -1.0])
    out = conv2d(np.zeros((3, 0, 4)), Tensor(np.ones((2, 3, 3, 3))), Tensor(b), spec, (1, 3)).data
    np.testing.assert_array_equal(out, np.broadcast_to(b[:, None, None], (2, 1, 3)))


def test_conv_shape_errors():
    spec = ConvSpec.pointwise(3, 2)
    with pytest.raises(ValueError):
        conv2d(np.zeros((4, 2, 2)), Tensor(np.zeros((2, 3, 1, 1))), Tensor(np.zeros(2)), spec)
    with pytest.raises(ValueError):
        conv2d(np.zeros((3, 2, 2)), Tensor(np.zeros((2, 3, 1, 1))), Tensor(np.zeros(3)), spec)
    with pytest.raises(ValueError):
        ConvSpec(1, 1, (1, 2), ((0, 0),))
    with pytest.raises(ValueError):
        ConvSpec(1, 1, (1, 2), ((0, 1), (0, 0)))


def numeric_grad(f, arr, eps=1e-6):
    g = np.zeros_like(arr)
    for idx in np.ndindex(arr.shape):
        old = arr[idx]
        arr[idx] = old + eps
        up = f()
        arr[idx] = old - eps
        down = f()
        arr[idx] = old
        g[idx] = (up - down) / (2 * eps)
    return g


def test_gradients_through_small_network(rng):
    s1 = ConvSpec.grid(2, 3, range(-1, 1), range(0, 2))
    s2 = ConvSpec.pointwise(3, 2)
    x = nnet.parameter(rng.normal(size=(2, 2, 3, 4)))
    w1, b1 = nnet.parameter(rng.normal(size=(3, 2, 2, 2))), nnet.parameter(rng.normal(size=3))
    w2, b2 = nnet.parameter(rng.normal(size=(2, 3, 1, 1))), nnet.parameter(rng.normal(size=2))
    target = rng.normal(size=(2, 2, 3, 3))

    def forward():
        h = nnet.relu(conv2d(x, w1, b1, s1, (3, 3)))
        y = nnet.add(conv2d(h, w2, b2, s2), nnet.scale(conv2d(h, w2, b2, s2), 0.5))
        return nnet.tensor_sum(_dot(y, target))

    params = [x, w1, b1, w2, b2]
    out = forward()
    out.backward()
    for p in params:
        num = numeric_grad(lambda: float(forward().data), p.data)
        np.testing.assert_allclose(p.grad, num, rtol=1e-6, atol=1e-8)


def _dot(y, target):
    return nnet.custom_op(float((y.data * target).sum()), [y], [target])


def test_backward_errors():
    with pytest.raises(RuntimeError):
        nnet.parameter(np.ones(1)).backward()
    x = nnet.parameter(np.ones((2, 2)))
    with pytest.raises(ValueError):
        nnet.scale(x, 2.0).backward()


def test_graph_freed_after_backward():
    x = nnet.parameter(np.ones(3))
    y = nnet.tensor_sum(nnet.scale(x, 3.0))
    y.backward()
    np.testing.assert_array_equal(x.grad, 3.0)
    with pytest.raises(RuntimeError):
        y.backward()


def test_no_graph_without_trainable_inputs():
    y = nnet.relu(np.array([-1.0, 2.0]))
    assert not y.requires_grad
    np.testing.assert_array_equal(y.data, [0.0, 2.0])


def test_adam_first_step():
    # bias correction makes the first update lr * g / (|g| + eps)
    p = nnet.parameter(np.array([1.0, -2.0, 3.0]))
    g = np.array([0.5, -4.0, 0.0])
    state = nnet.AdamState([p])
    adam_step([p], [g], state, lr=0.1)
    np.testing.assert_allclose(p.data, [0.9, -1.9, 3.0], atol=1e-7)
    assert state.step == 1
