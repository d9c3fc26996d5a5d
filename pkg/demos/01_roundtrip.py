"""Compress a photo with the flat model and with the shipped desk weights.

Run from the repository root:  python3 demos/01_roundtrip.py
Needs scikit-image for the sample photo.
"""

from pathlib import Path

import numpy as np
from skimage import data

from llicti import codec, interpolator

WEIGHTS = Path(__file__).resolve().parent.parent / "weights" / "desk-5k.lltw"

# A held-out photo: the desk weights never saw this cat.
img = data.chelsea()
h, w = img.shape[:2]
print(f"image {w}x{h}, raw {h * w * 3} bytes")

models = {"flat": None}
if WEIGHTS.exists():
    models["desk-5k"] = interpolator.load_weights(WEIGHTS)

for name, weights in models.items():
    stream = codec.encode(img, weights)
    back = codec.decode(stream, weights)
    assert np.array_equal(back, img), "round trip must be exact"

    # The estimate is the model's ideal code length; the stream should be close.
    est = codec.estimate_bits(img, weights)
    print(f"\n{name}: {len(stream)} bytes, {8 * len(stream) / (h * w):.3f} bpp "
          f"(estimate {est.bpp:.3f} bpp), decoded exactly")
    for i, bpp in est.scale_bpp().items():
        print(f"  scale {i}: {bpp:.4f} bpp")
    print(f"  coarsest x00 stored raw: {est.fixed_bits // 8} bytes")

# The flat model spends 8 bits on Y and log2(511) on each chroma difference,
# which is more than raw RGB; only a trained model gets below 24 bpp.
print(f"\nflat bound per symbol: Y 8.000, Co/Cg {np.log2(511):.3f} bits")
