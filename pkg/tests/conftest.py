import os
import time

import numpy as np
import pytest

from llicti import interpolator, trainer

# Desk-scale training setup shared by the acceptance checks. Five photos for
# training, three different photos held out.
DESK_TRAIN = ("astronaut", "hubble_deep_field", "immunohistochemistry", "retina", "motorcycle_left")
DESK_HELDOUT = ("chelsea", "coffee", "rocket")
DESK_CONFIG = trainer.TrainConfig(
    batch_size=8, patch_size=32, lr=1e-3, max_steps=5000, eval_every=250, val_patches=32, seed=0
)

_CRITERIA = {}


def photo(name):
    """An skimage sample photo as (H, W, 3) uint8; gray ones are replicated to RGB."""
    from skimage import data

    if name == "motorcycle_left":
        img = data.stereo_motorcycle()[0]
    else:
        img = getattr(data, name)()
    img = np.asarray(img)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=2)
    return np.ascontiguousarray(img[..., :3], dtype=np.uint8)


def center_crop(img, h, w):
    r = (img.shape[0] - h) // 2
    c = (img.shape[1] - w) // 2
    return img[r:r + h, c:c + w].copy()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """Train the default-size model at desk scale once per session.

    Set LLICTI_DESK_WEIGHTS to a weight file to skip training and reuse it.
    """
    cached = os.environ.get("LLICTI_DESK_WEIGHTS")
    if cached:
        return interpolator.load_weights(cached), None, 0.0
    out = tmp_path_factory.mktemp("desk")
    corpus = trainer.Corpus([photo(n) for n in DESK_TRAIN], DESK_TRAIN)
    val = trainer.Corpus([photo(n) for n in DESK_HELDOUT], DESK_HELDOUT)
    t0 = time.perf_counter()
    weights, log = trainer.train(corpus, DESK_CONFIG, interpolator.ICNNConfig(), val_corpus=val,
                                 log_path=out / "train.csv")
    elapsed = time.perf_counter() - t0
    interpolator.save_weights(weights, out / "desk.lltw")
    return weights, log, elapsed


@pytest.fixture(scope="session")
def desk_weights(desk_run):
    return desk_run[0]


@pytest.fixture
def criterion():
    """Record an acceptance outcome; the summary prints one line per criterion."""
    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}: {detail}")
