import numpy as np
import pytest
from PIL import Image

from llicti.imagefile import UnsupportedImageError, read_image, write_image


def test_ppm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (7, 5, 3), dtype=np.uint8)
    write_image(tmp_path / "a.ppm", img)
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n5 7\n255\n")
    np.testing.assert_array_equal(read_image(tmp_path / "a.ppm"), img)


def test_ppm_with_comments(tmp_path):
    (tmp_path / "c.ppm").write_bytes(b"P6\n# made by hand\n2 1\n255\n" + bytes(range(6)))
    np.testing.assert_array_equal(read_image(tmp_path / "c.ppm"), [[[0, 1, 2], [3, 4, 5]]])


def test_png_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (6, 9, 3), dtype=np.uint8)
    write_image(tmp_path / "a.png", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.png"), img)


def test_gray_png_becomes_rgb(tmp_path):
    Image.fromarray(np.arange(12, dtype=np.uint8).reshape(3, 4), "L").save(tmp_path / "g.png")
    out = read_image(tmp_path / "g.png")
    assert out.shape == (3, 4, 3)
    np.testing.assert_array_equal(out[..., 0], out[..., 2])


@pytest.mark.parametrize("shape, dtype", [((4, 4), np.uint16), ((4, 4, 4), np.uint8)], ids=["16bit", "rgba"])
def test_unsupported_png_modes(tmp_path, shape, dtype):
    Image.fromarray(np.full(shape, 1000 if dtype == np.uint16 else 7, dtype=dtype)).save(tmp_path / "x.png")
    with pytest.raises(UnsupportedImageError):
        read_image(tmp_path / "x.png")


def test_unsupported_files(tmp_path):
    (tmp_path / "x.bmp").write_bytes(b"BM" + bytes(60))
    with pytest.raises(UnsupportedImageError):
        read_image(tmp_path / "x.bmp")
    (tmp_path / "deep.ppm").write_bytes(b"P6\n1 1\n65535\n" + bytes(6))
    with pytest.raises(UnsupportedImageError):
        read_image(tmp_path / "deep.ppm")
    (tmp_path / "short.ppm").write_bytes(b"P6\n4 4\n255\n" + bytes(5))
    with pytest.raises(UnsupportedImageError):
        read_image(tmp_path / "short.ppm")
