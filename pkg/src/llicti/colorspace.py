"""Reversible integer RGB <-> YCoCg-R transform (lifting form).

Works on scalars or on integer arrays whose last axis holds the three
components. The ``>> 1`` steps are arithmetic shifts, i.e. floor division
toward minus infinity, which is what makes the transform exactly invertible
for negative intermediates.
"""

import numpy as np

# (lo, hi) of each output channel: Y, Co, Cg
YCC_RANGES = ((0, 255), (-255, 255), (-255, 255))
RGB_RANGE = (0, 255)


def _as_triplets(p, name):
    arr = np.asarray(p)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"{name}: last axis must have 3 components, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError(f"{name}: integer input required, got {arr.dtype}")
    return arr.astype(np.int32, copy=False)


def rgb_to_ycocgr(rgb):
    """Forward lifting: ``co = r - b; t = b + (co >> 1); cg = g - t; y = t + (cg >> 1)``.

    Returns an int32 array of shape ``rgb.shape`` holding (y, co, cg).
    """
    arr = _as_triplets(rgb, "rgb_to_ycocgr")
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ValueError("rgb_to_ycocgr: components must lie in [0, 255]")
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    co = r - b
    t = b + (co >> 1)
    cg = g - t
    y = t + (cg >> 1)
    return np.stack([y, co, cg], axis=-1)


def ycocgr_to_rgb(ycc):
    """Inverse lifting; exact on every output of :func:`rgb_to_ycocgr`."""
    arr = _as_triplets(ycc, "ycocgr_to_rgb")
    for c, (lo, hi) in enumerate(YCC_RANGES):
        ch = arr[..., c]
        if ch.size and (ch.min() < lo or ch.max() > hi):
            raise ValueError(f"ycocgr_to_rgb: channel {c} outside [{lo}, {hi}]")
    y, co, cg = arr[..., 0], arr[..., 1], arr[..., 2]
    t = y - (cg >> 1)
    g = cg + t
    b = t - (co >> 1)
    r = b + co
    out = np.stack([r, g, b], axis=-1)
    if out.size and (out.min() < 0 or out.max() > 255):
        # only reachable for in-range (y, co, cg) triples that no RGB maps to
        raise ValueError("ycocgr_to_rgb: input is not the image of any RGB triple")
    return out
