"""Train a narrow model for a few hundred steps and watch held-out bpp fall.

Run from the repository root:  python3 demos/03_train_small.py
Takes a minute or two on one core. Needs scikit-image for the photos.
"""

import numpy as np
from skimage import data

from llicti import codec, interpolator, trainer

train = trainer.Corpus([data.astronaut(), data.retina(), data.immunohistochemistry()],
                       ["astronaut", "retina", "immunohistochemistry"])
held = [data.coffee()[100:228, 200:328]]
val = trainer.Corpus(held, ["coffee"])

# 24 channels instead of 88: a quarter of the width, about 33K parameters.
icnn = interpolator.ICNNConfig(channels=24)
config = trainer.TrainConfig(batch_size=8, patch_size=32, lr=2e-3, max_steps=400, eval_every=50,
                             val_patches=16, seed=0)
before = interpolator.build(icnn, seed=config.seed)
print(f"{before.num_parameters()} parameters")


def progress(step, lr, train_bpp, val_bpp):
    print(f"step {step:4d}  lr {lr:.0e}  train {train_bpp:8.3f}  val {val_bpp:8.3f} bpp")


weights, log = trainer.train(train, config, icnn, val_corpus=val, progress=progress)

# Compare real stream sizes, not loss values: the untrained net is confidently
# wrong and costs far more than the flat model.
img = held[0]
px = img.shape[0] * img.shape[1]
for name, w in (("untrained", before), ("flat", None), ("trained", weights)):
    stream = codec.encode(img, w)
    assert np.array_equal(codec.decode(stream, w), img)
    print(f"{name:9s} {8 * len(stream) / px:7.3f} bpp")
