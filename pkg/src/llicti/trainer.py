"""Desk-scale training of the interpolator weights.

The loss is the model code length of every interpolated sub-pixel in a
batch of random patches (coarsest subband excluded), in bits per
interpolated pixel. Interpolators contribute independently but are updated
together with one Adam step.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import codec, nnet, probmodel
from .colorspace import rgb_to_ycocgr
from .imagefile import read_image
from .interpolator import CONTEXTS, INTERPOLATORS, ICNNConfig, build, save_weights
from .pyramid import build_pyramid

log = logging.getLogger(__name__)

# Table I, experiment 14: bpp per scale over all image pixels
REFERENCE_SCALE_BPP = {1: 5.465, 2: 1.841, 3: 0.553, 4: 0.160, 5: 0.045}
FLAT_BITS_PER_PIXEL = sum(math.log2(s.size) for s in probmodel.CHANNEL_SUPPORTS)


@dataclass
class TrainConfig:
    batch_size: int = 64
    patch_size: int = 64
    lr: float = 1e-4
    lr_decay: float = 0.5
    lr_min: float = 1e-5
    patience: int = 5
    plateau_tol: float = 1e-3
    max_steps: int = 5000
    eval_every: int = 100
    val_patches: int = 64
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if self.lr_min > self.lr:
            raise ValueError(f"lr_min {self.lr_min} exceeds initial lr {self.lr}")
        if self.batch_size < 1 or self.patch_size < 2 or self.max_steps < 0:
            raise ValueError(f"invalid TrainConfig {self}")


class Corpus:
    """Images held in memory, with a seeded random-crop sampler."""

    def __init__(self, images, names=None):
        self.images = [np.asarray(im, dtype=np.uint8) for im in images]
        if not self.images:
            raise ValueError("empty corpus")
        for im in self.images:
            if im.ndim != 3 or im.shape[2] != 3:
                raise ValueError(f"corpus images must be (H, W, 3), got {im.shape}")
        self.names = list(names) if names is not None else [f"image{i}" for i in range(len(self.images))]

    @classmethod
    def from_paths(cls, paths):
        paths = [Path(p) for p in paths]
        images = []
        for p in paths:
            try:
                images.append(read_image(p))
            except OSError as e:
                raise OSError(f"cannot read corpus image {p}: {e}") from e
        return cls(images, [p.name for p in paths])

    def __len__(self):
        return len(self.images)

    def sample(self, rng, n, patch):
        """``n`` random ``patch`` x ``patch`` crops; small images are edge-padded first."""
        out = np.empty((n, patch, patch, 3), dtype=np.uint8)
        for j in range(n):
            im = self.images[rng.integers(len(self.images))]
            h, w = im.shape[:2]
            if h < patch or w < patch:
                im = np.pad(im, ((0, max(0, patch - h)), (0, max(0, patch - w)), (0, 0)), mode="edge")
                h, w = im.shape[:2]
            r = rng.integers(h - patch + 1)
            c = rng.integers(w - patch + 1)
            out[j] = im[r:r + patch, c:c + patch]
        return out


def _flat_loss(pyr):
    n = sum(b[0].size for s in pyr.bands.values() for b in s.values())
    return n, n * FLAT_BITS_PER_PIXEL


def loss(patches, weights, scales=5, breakdown=None):
    """Bits per interpolated pixel of ``patches`` (N, P, P, 3) under ``weights``.

    Returns a scalar Tensor wired for ``backward``. ``weights=None`` scores
    the flat model. If ``breakdown`` is a dict it receives the bits of each
    ``(scale, target, channel)``.
    """
    patches = np.asarray(patches)
    # channels first, batch second: (3, N, P, P)
    planes = rgb_to_ycocgr(patches).transpose(3, 0, 1, 2)
    if weights is not None:
        scales = weights.config.scales
    pyr = build_pyramid(planes, scales)
    if weights is None:
        n, total = _flat_loss(pyr)
        return nnet.Tensor(np.asarray(total / n))

    dtype = weights.parameters()[0].data.dtype
    k = weights.config.mixtures
    terms, count = [], 0
    for i in range(scales, 0, -1):
        for target in INTERPOLATORS:
            band = pyr.band(i, target)
            _, n, h, w = band.shape
            if h == 0 or w == 0:
                continue
            contexts = [pyr.band(i, name) for name in CONTEXTS[target]]
            raw = weights.forward(target, contexts, (h, w), i)
            kc = raw["alpha"].shape[0] // 3
            shaped = [
                raw["pi"].data.reshape(3, k, n, h, w),
                raw["mu"].data.reshape(3, k, n, h, w),
                raw["sigma"].data.reshape(3, k, n, h, w),
                raw["alpha"].data.reshape(3, kc, n, h, w),
            ]
            nll, grads = probmodel.gmm_nll(*shaped, band.astype(dtype))
            if breakdown is not None:
                parts = _split_nll(*(a.astype(np.float64) for a in shaped), band)
                for c, v in enumerate(parts):
                    key = (i, target, c)
                    breakdown[key] = breakdown.get(key, 0.0) + v / math.log(2)
            grads = [g.reshape(raw[hd].shape) for g, hd in zip(grads, ("pi", "mu", "sigma", "alpha"))]
            terms.append(nnet.custom_op(nll, [raw[hd] for hd in ("pi", "mu", "sigma", "alpha")], grads))
            count += n * h * w
    if not terms:
        return nnet.Tensor(np.asarray(0.0))
    out = nnet.scale(nnet.add(*terms), 1.0 / (math.log(2) * count))
    if not np.isfinite(out.data):
        raise FloatingPointError(_param_report(weights))
    return out


def _split_nll(logits, means, log_scales, coeffs, band):
    """Per-channel NLL (nats) of one subband batch, same layout as ``gmm_nll``."""
    x = band.astype(np.float64)
    mu = means.copy()
    mu[1] += coeffs[0] * x[0][None]
    mu[2] += coeffs[1] * x[0][None] + coeffs[2] * x[1][None]
    sigma = np.exp(np.clip(log_scales, probmodel.LOG_SIGMA_MIN, probmodel.LOG_SIGMA_MAX))
    out = []
    for c, sup in enumerate(probmodel.CHANNEL_SUPPORTS):
        logp = probmodel.log_bin_prob(x[c][None], mu[c], sigma[c], sup.lo, sup.hi)[0]
        lg = logits[c]
        m = lg.max(axis=0, keepdims=True)
        log_w = lg - m - np.log(np.exp(lg - m).sum(axis=0, keepdims=True))
        j = log_w + logp
        jm = j.max(axis=0, keepdims=True)
        out.append(-float((jm + np.log(np.exp(j - jm).sum(axis=0, keepdims=True))).sum()))
    return out


def _param_report(weights):
    lines = ["non-finite training loss; parameter statistics:"]
    for name, p in weights.named_parameters():
        d = p.data
        bad = int((~np.isfinite(d)).sum())
        lines.append(f"  {name}: min={np.nanmin(d):.4g} max={np.nanmax(d):.4g} nonfinite={bad}")
    return "\n".join(lines)


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)

    def add(self, step, lr, train_bpp, val_bpp):
        self.rows.append({"step": step, "lr": lr, "train_bpp": train_bpp, "val_bpp": val_bpp})

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            wr = csv.DictWriter(f, fieldnames=["step", "lr", "train_bpp", "val_bpp"])
            wr.writeheader()
            wr.writerows(self.rows)


class PlateauSchedule:
    """Halve the learning rate when validation cost stops improving."""

    def __init__(self, lr, decay=0.5, lr_min=1e-5, patience=5, tol=1e-3):
        self.lr = lr
        self.decay = decay
        self.lr_min = lr_min
        self.patience = patience
        self.tol = tol
        self.best = math.inf
        self.bad = 0

    def observe(self, val):
        if val < self.best * (1 - self.tol):
            self.best = val
            self.bad = 0
        else:
            self.bad += 1
            if self.bad >= self.patience:
                self.lr = max(self.lr * self.decay, self.lr_min)
                self.bad = 0
        return self.lr


def _val_loss(patches, weights, chunk=16):
    total = 0.0
    for s in range(0, len(patches), chunk):
        part = patches[s:s + chunk]
        total += float(loss(part, weights).data) * len(part)
    return total / len(patches)


def train(corpus, config=TrainConfig(), icnn_config=ICNNConfig(), val_corpus=None,
          weights=None, log_path=None, checkpoint_dir=None, progress=None):
    """Train interpolator weights on random crops of ``corpus``.

    Returns ``(weights, TrainLog)``; weights come back as float32.
    """
    if not isinstance(corpus, Corpus):
        corpus = Corpus.from_paths(corpus)
    rng = np.random.default_rng(config.seed)
    if weights is None:
        weights = build(icnn_config, seed=config.seed)
    weights.astype(np.dtype(config.dtype))
    params = weights.parameters()
    state = nnet.AdamState(params)
    sched = PlateauSchedule(config.lr, config.lr_decay, config.lr_min, config.patience, config.plateau_tol)
    val_src = val_corpus if val_corpus is not None else corpus
    val_patches = val_src.sample(np.random.default_rng(config.seed + 1), config.val_patches, config.patch_size)
    tlog = TrainLog()
    ckpt = Path(checkpoint_dir) if checkpoint_dir else None
    if ckpt:
        ckpt.mkdir(parents=True, exist_ok=True)

    running = []
    for step in range(config.max_steps + 1):
        if step % config.eval_every == 0 or step == config.max_steps:
            val = _val_loss(val_patches, weights)
            lr = sched.observe(val) if step else sched.lr
            train_bpp = float(np.mean(running)) if running else float("nan")
            tlog.add(step, lr, train_bpp, val)
            running = []
            log.info("step %d lr %.3g train %.4f val %.4f", step, lr, train_bpp, val)
            if progress:
                progress(step, lr, train_bpp, val)
            if ckpt:
                save_weights(weights, ckpt / f"step{step:06d}.lltw")
        if step == config.max_steps:
            break
        batch = corpus.sample(rng, config.batch_size, config.patch_size)
        out = loss(batch, weights)
        for p in params:
            p.zero_grad()
        out.backward()
        nnet.adam_step(params, [p.grad for p in params], state, sched.lr)
        running.append(float(out.data))

    if log_path:
        tlog.write_csv(log_path)
    weights.astype(np.float32)
    return weights, tlog


@dataclass
class EvalResult:
    names: list
    scale_bpp: dict
    fixed_bpp: float
    header_bpp: float
    total_bpp: list
    flat_bpp: list

    @property
    def mean_bpp(self):
        return float(np.mean(self.total_bpp))

    @property
    def mean_flat_bpp(self):
        return float(np.mean(self.flat_bpp))

    def table(self):
        """Per-scale bpp next to the published experiment-14 row."""
        lines = [f"{'':10s}{'measured':>10s}{'published':>10s}"]
        for i in sorted(self.scale_bpp):
            ref = REFERENCE_SCALE_BPP.get(i)
            lines.append(f"{'scale ' + str(i):10s}{self.scale_bpp[i]:10.3f}{ref if ref is not None else float('nan'):10.3f}")
        lines.append(f"{'x00 fixed':10s}{self.fixed_bpp:10.3f}")
        lines.append(f"{'header':10s}{self.header_bpp:10.3f}")
        lines.append(f"{'total':10s}{self.mean_bpp:10.3f}{sum(REFERENCE_SCALE_BPP.values()):10.3f}")
        lines.append(f"{'flat':10s}{self.mean_flat_bpp:10.3f}")
        lines.append(f"{'raw RGB':10s}{24.0:10.3f}")
        return "\n".join(lines)


def evaluate(corpus, weights):
    """Average per-scale bpp of every corpus image (whole images, no cropping).

    ``weights=None`` evaluates the flat model.
    """
    if not isinstance(corpus, Corpus):
        corpus = Corpus.from_paths(corpus)
    scale_sums, fixed, header, totals, flats = {}, [], [], [], []
    for im in corpus.images:
        est = codec.estimate_bits(im, weights)
        flat = codec.estimate_bits(im, None, scales=est.scales)
        for i, v in est.scale_bpp().items():
            scale_sums[i] = scale_sums.get(i, 0.0) + v
        fixed.append(est.fixed_bits / est.pixels)
        header.append(est.header_bits / est.pixels)
        totals.append(est.bpp)
        flats.append(flat.bpp)
    n = len(corpus)
    return EvalResult(
        names=corpus.names,
        scale_bpp={i: v / n for i, v in scale_sums.items()},
        fixed_bpp=float(np.mean(fixed)),
        header_bpp=float(np.mean(header)),
        total_bpp=totals,
        flat_bpp=flats,
    )
