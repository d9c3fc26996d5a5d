"""Even/odd multi-scale subband decomposition.

Planes are numpy arrays whose *last two* axes are (rows, cols); any leading
axes (channels, batch) ride along untouched. Subband ``x_mn`` holds the parent
samples at row parity ``m`` and column parity ``n``, so ``x00`` gets the ceil
share of each odd dimension.
"""

from dataclasses import dataclass, field

import numpy as np

SUBBANDS = ("00", "01", "10", "11")


def split(parent):
    """Split a plane into ``(x00, x01, x10, x11)``."""
    parent = np.asarray(parent)
    if parent.ndim < 2 or parent.shape[-2] == 0 or parent.shape[-1] == 0:
        raise ValueError(f"split: need a non-empty plane, got shape {parent.shape}")
    return (
        parent[..., 0::2, 0::2],
        parent[..., 0::2, 1::2],
        parent[..., 1::2, 0::2],
        parent[..., 1::2, 1::2],
    )


def merge(x00, x01, x10, x11):
    """Interleave four subbands back into their parent plane."""
    x00, x01, x10, x11 = map(np.asarray, (x00, x01, x10, x11))
    h0, w0 = x00.shape[-2:]
    h1, w1 = x11.shape[-2:]
    lead = x00.shape[:-2]
    ok = (
        x01.shape == lead + (h0, w1)
        and x10.shape == lead + (h1, w0)
        and x11.shape[:-2] == lead
        and h0 - h1 in (0, 1)
        and w0 - w1 in (0, 1)
    )
    if not ok:
        raise ValueError(
            "merge: inconsistent subband shapes "
            f"x00={x00.shape} x01={x01.shape} x10={x10.shape} x11={x11.shape}"
        )
    dtype = np.result_type(x00, x01, x10, x11)
    out = np.empty(lead + (h0 + h1, w0 + w1), dtype=dtype)
    out[..., 0::2, 0::2] = x00
    out[..., 0::2, 1::2] = x01
    out[..., 1::2, 0::2] = x10
    out[..., 1::2, 1::2] = x11
    return out


def split_shapes(h, w):
    """Shapes of (x00, x01, x10, x11) for an ``h`` x ``w`` parent."""
    hc, hf = (h + 1) // 2, h // 2
    wc, wf = (w + 1) // 2, w // 2
    return {"00": (hc, wc), "01": (hc, wf), "10": (hf, wc), "11": (hf, wf)}


def pyramid_shapes(h, w, scales):
    """Per-scale subband shapes; entry ``i - 1`` describes scale ``i``."""
    out = []
    for _ in range(scales):
        shapes = split_shapes(h, w)
        out.append(shapes)
        h, w = shapes["00"]
    return out


@dataclass
class Pyramid:
    """Subbands of every scale.

    ``x00[i]`` is the low subband at scale ``i`` (``x00[0]`` is the input
    plane itself) and ``bands[i]`` maps "01"/"10"/"11" to that scale's
    detail subbands, for ``i = 1..scales``.
    """

    scales: int
    x00: list
    bands: dict = field(default_factory=dict)

    @property
    def coarsest(self):
        return self.x00[self.scales]

    def band(self, scale, name):
        if name == "00":
            return self.x00[scale]
        return self.bands[scale][name]

    def reconstruct(self):
        plane = self.coarsest
        for i in range(self.scales, 0, -1):
            b = self.bands[i]
            plane = merge(plane, b["01"], b["10"], b["11"])
        return plane

    def pixel_count(self):
        n = self.coarsest.shape[-2] * self.coarsest.shape[-1]
        for b in self.bands.values():
            n += sum(v.shape[-2] * v.shape[-1] for v in b.values())
        return n


def build_pyramid(image, scales):
    """Split ``image`` recursively on its low subband ``scales`` times."""
    if scales < 1:
        raise ValueError(f"build_pyramid: scales must be >= 1, got {scales}")
    image = np.asarray(image)
    pyr = Pyramid(scales=scales, x00=[image])
    for i in range(1, scales + 1):
        x00, x01, x10, x11 = split(pyr.x00[i - 1])
        pyr.x00.append(x00)
        pyr.bands[i] = {"01": x01, "10": x10, "11": x11}
    return pyr
