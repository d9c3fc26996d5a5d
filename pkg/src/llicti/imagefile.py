"""8-bit RGB image files: binary PPM (P6) always, PNG when Pillow is installed."""

import re

import numpy as np


class UnsupportedImageError(ValueError):
    pass


_PPM_HEADER = re.compile(rb"P6(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)(?:\s+|#[^\n]*\n)+(\d+)\s")


def read_ppm(path):
    with open(path, "rb") as f:
        data = f.read()
    m = _PPM_HEADER.match(data)
    if not m:
        raise UnsupportedImageError(f"{path}: not a binary (P6) PPM file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise UnsupportedImageError(f"{path}: only 8-bit PPM is supported (maxval {maxval})")
    body = data[m.end():]
    if len(body) < w * h * 3:
        raise UnsupportedImageError(f"{path}: truncated pixel data")
    return np.frombuffer(body, dtype=np.uint8, count=w * h * 3).reshape(h, w, 3).copy()


def write_ppm(path, image):
    img = np.ascontiguousarray(image, dtype=np.uint8)
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())


def _pillow():
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - depends on the environment
        raise UnsupportedImageError("PNG support needs Pillow (pip install pillow)") from None
    return Image


def read_png(path):
    Image = _pillow()
    with Image.open(path) as im:
        if im.format != "PNG":
            raise UnsupportedImageError(f"{path}: not a PNG file")
        # 16-bit PNGs open as "I;16"/"I"; alpha and other modes are refused too
        if im.mode not in ("RGB", "P", "L"):
            raise UnsupportedImageError(f"{path}: unsupported PNG mode {im.mode!r} (need 8-bit RGB)")
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_png(path, image):
    Image = _pillow()
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8), "RGB").save(path, format="PNG")


def read_image(path):
    """Load an ``(H, W, 3)`` uint8 array, sniffing the format from the content."""
    with open(path, "rb") as f:
        magic = f.read(8)
    if magic.startswith(b"P6"):
        return read_ppm(path)
    if magic == b"\x89PNG\r\n\x1a\n":
        return read_png(path)
    raise UnsupportedImageError(f"{path}: unsupported image format (need PPM P6 or PNG)")


def write_image(path, image):
    if str(path).lower().endswith(".png"):
        write_png(path, image)
    else:
        write_ppm(path, image)
