import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from llicti.colorspace import YCC_RANGES, rgb_to_ycocgr, ycocgr_to_rgb

component = st.integers(0, 255)


@pytest.mark.parametrize(
    "rgb, ycc",
    [
        ((0, 0, 0), (0, 0, 0)),
        ((255, 255, 255), (255, 0, 0)),
        # co = 255, t = 127, cg = -127, y = 127 + floor(-127 / 2) = 63
        ((255, 0, 0), (63, 255, -127)),
    ],
)
def test_forward_hand_values(rgb, ycc):
    assert tuple(rgb_to_ycocgr(np.array(rgb))) == ycc


@pytest.mark.parametrize(
    "ycc, rgb",
    [((0, 0, 0), (0, 0, 0)), ((63, 255, -127), (255, 0, 0)), ((255, 0, 0), (255, 255, 255))],
)
def test_inverse_hand_values(ycc, rgb):
    assert tuple(ycocgr_to_rgb(np.array(ycc))) == rgb


def test_floor_not_truncation():
    # (0, 0, 1): co = -1, t = 1 + (-1 >> 1) = 0; truncation would give t = 1
    assert tuple(rgb_to_ycocgr(np.array([0, 0, 1]))) == (0, -1, 0)


@given(component, component, component)
def test_round_trip_and_ranges(r, g, b):
    ycc = rgb_to_ycocgr(np.array([r, g, b]))
    for v, (lo, hi) in zip(ycc, YCC_RANGES):
        assert lo <= v <= hi
    assert tuple(ycocgr_to_rgb(ycc)) == (r, g, b)


def test_array_shapes_preserved(rng):
    img = rng.integers(0, 256, (5, 7, 3))
    out = rgb_to_ycocgr(img)
    assert out.shape == img.shape
    np.testing.assert_array_equal(ycocgr_to_rgb(out), img)


@pytest.mark.parametrize("bad", [(256, 0, 0), (0, -1, 0), (0, 0, 1000)])
def test_out_of_range_rgb(bad):
    with pytest.raises(ValueError):
        rgb_to_ycocgr(np.array(bad))


def test_out_of_range_ycc():
    with pytest.raises(ValueError):
        ycocgr_to_rgb(np.array([0, 300, 0]))
    with pytest.raises(ValueError):
        ycocgr_to_rgb(np.array([256, 0, 0]))


def test_rejects_float_and_bad_shape():
    with pytest.raises(ValueError):
        rgb_to_ycocgr(np.array([0.5, 0, 0]))
    with pytest.raises(ValueError):
        rgb_to_ycocgr(np.zeros((4, 2), dtype=int))
