import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from llicti.pyramid import build_pyramid, merge, pyramid_shapes, split, split_shapes


def test_split_hand_example():
    x = np.arange(12).reshape(3, 4)
    x00, x01, x10, x11 = split(x)
    np.testing.assert_array_equal(x00, [[0, 2], [8, 10]])
    np.testing.assert_array_equal(x01, [[1, 3], [9, 11]])
    np.testing.assert_array_equal(x10, [[4, 6]])
    np.testing.assert_array_equal(x11, [[5, 7]])


@given(st.integers(1, 40), st.integers(1, 40))
def test_split_shapes_ceil_floor(h, w):
    shapes = split_shapes(h, w)
    assert shapes["00"] == (math.ceil(h / 2), math.ceil(w / 2))
    assert shapes["01"] == (math.ceil(h / 2), w // 2)
    assert shapes["10"] == (h // 2, math.ceil(w / 2))
    assert shapes["11"] == (h // 2, w // 2)
    parts = split(np.zeros((h, w)))
    assert [p.shape for p in parts] == [shapes[k] for k in ("00", "01", "10", "11")]


@given(st.integers(1, 33), st.integers(1, 33), st.integers(0, 2**32 - 1))
def test_merge_inverts_split(h, w, seed):
    x = np.random.default_rng(seed).integers(-255, 256, (3, h, w))
    np.testing.assert_array_equal(merge(*split(x)), x)


@given(st.integers(1, 70), st.integers(1, 70), st.integers(1, 7))
def test_pyramid_reconstructs(h, w, scales):
    x = np.random.default_rng(h * 100 + w).integers(0, 256, (3, h, w))
    pyr = build_pyramid(x, scales)
    np.testing.assert_array_equal(pyr.reconstruct(), x)
    assert pyr.pixel_count() == h * w
    for i, shapes in enumerate(pyramid_shapes(h, w, scales), start=1):
        for name, shape in shapes.items():
            assert pyr.band(i, name).shape[-2:] == shape


def test_leading_axes_ride_along():
    x = np.arange(2 * 3 * 5 * 6).reshape(2, 3, 5, 6)
    for p, ref in zip(split(x), split(x[1, 2])):
        np.testing.assert_array_equal(p[1, 2], ref)


def test_errors():
    with pytest.raises(ValueError):
        split(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        merge(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((3, 3)))
    with pytest.raises(ValueError):
        build_pyramid(np.zeros((4, 4)), 0)


def test_coarsest_of_768x576():
    assert pyramid_shapes(576, 768, 5)[-1]["00"] == (18, 24)
