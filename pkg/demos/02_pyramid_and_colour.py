"""The two integer transforms under the codec, and what the pyramid costs.

Run from the repository root:  python3 demos/02_pyramid_and_colour.py
"""

import numpy as np

from llicti.colorspace import rgb_to_ycocgr, ycocgr_to_rgb
from llicti.pyramid import build_pyramid, pyramid_shapes

# YCoCg-R is a lifting transform: integers in, integers out, exactly invertible.
rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [17, 200, 3]]])
ycc = rgb_to_ycocgr(rgb)
for a, b in zip(rgb[0], ycc[0]):
    print(f"RGB {a.tolist()} -> YCoCg-R {b.tolist()}")
assert np.array_equal(ycocgr_to_rgb(ycc), rgb)

# Each scale splits the low subband by row and column parity. Odd sizes give
# x00 the extra row/column, so nothing is lost or duplicated.
rng = np.random.default_rng(0)
plane = rng.integers(0, 256, (3, 37, 50))
pyr = build_pyramid(plane, 4)
assert np.array_equal(pyr.reconstruct(), plane)
assert pyr.pixel_count() == 37 * 50
for i, shapes in enumerate(pyramid_shapes(37, 50, 4), start=1):
    print(f"scale {i}: " + "  ".join(f"x{k} {v[0]}x{v[1]}" for k, v in sorted(shapes.items())))

# Only the coarsest x00 is sent uncoded. For 768x576 at five scales that is
# 24x18 pixels, 1296 bytes, about 0.023 bits per image pixel.
ch, cw = pyramid_shapes(576, 768, 5)[-1]["00"]
print(f"\n768x576, 5 scales: coarsest {cw}x{ch}, {ch * cw * 3} bytes, "
      f"{8 * ch * cw * 3 / (576 * 768):.4f} bits/pixel")
