"""The three interpolator CNNs and their weight files.

Each interpolator (targets x11, x01, x10) is four independent networks, one
per distribution parameter ("heads"). A head has one layer-1 convolution
per context subband, whose outputs are summed and passed through ReLU, then
``L - 1`` pointwise convolutions with ReLU between them.
"""

import hashlib
import json
import struct
from dataclasses import asdict, dataclass

import numpy as np

from . import nnet
from .errors import FormatError
from .pyramid import pyramid_shapes

INTERPOLATORS = ("11", "01", "10")
CONTEXTS = {"11": ("00",), "01": ("00", "11"), "10": ("00", "11", "01")}
HEADS = ("pi", "mu", "sigma", "alpha")

# Offset ranges (rows, cols) into each context subband, relative to the
# target's own (u, v). Each range is the nearest samples on the parent grid,
# symmetric about the target position.
TAP_RANGES = {
    ("00", "11"): (range(-1, 3), range(-1, 3)),
    ("00", "01"): (range(-1, 2), range(-1, 3)),
    ("11", "01"): (range(-2, 2), range(-1, 2)),
    ("00", "10"): (range(-1, 3), range(-1, 2)),
    ("11", "10"): (range(-1, 2), range(-2, 2)),
    ("01", "10"): (range(-1, 3), range(-2, 2)),
}

# contexts enter layer 1 as value / INPUT_SCALE; the mu head's last layer
# emits in units of INPUT_SCALE symbols
INPUT_SCALE = 128.0
MU_SCALE = 128.0

WEIGHTS_MAGIC = b"LLTW"
WEIGHTS_VERSION = 1


@dataclass(frozen=True)
class ICNNConfig:
    channels: int = 88
    layers: int = 3
    mixtures: int = 3
    scales: int = 5
    share_across_scales: bool = True
    per_mixture_alpha: bool = False

    def __post_init__(self):
        if self.layers < 2 or self.channels < 1 or self.mixtures < 1 or self.scales < 1:
            raise ValueError(f"invalid ICNNConfig {self}")

    def head_outputs(self, head):
        if head == "alpha":
            return 3 * self.mixtures if self.per_mixture_alpha else 3
        return 3 * self.mixtures

    @property
    def weight_sets(self):
        return 1 if self.share_across_scales else self.scales


def tap_spec(context, target, out_channels):
    rows, cols = TAP_RANGES[(context, target)]
    return nnet.ConvSpec.grid(3, out_channels, rows, cols)


class HeadNet:
    """One parameter head: layer-1 branches + pointwise stack."""

    def __init__(self, target, out_channels, config):
        c = config.channels
        self.target = target
        self.branch_specs = [tap_spec(ctx, target, c) for ctx in CONTEXTS[target]]
        dims = [c] * (config.layers - 1) + [out_channels]
        self.layer_specs = [nnet.ConvSpec.pointwise(dims[i], dims[i + 1]) for i in range(config.layers - 1)]
        self.params = []
        for spec in self.branch_specs + self.layer_specs:
            kh, kw = spec.kernel
            self.params.append(nnet.parameter(np.zeros((spec.out_channels, spec.in_channels, kh, kw), np.float32)))
            self.params.append(nnet.parameter(np.zeros(spec.out_channels, np.float32)))

    def init(self, rng):
        for spec, w, b in zip(self.branch_specs + self.layer_specs, self.params[0::2], self.params[1::2]):
            fan_in = spec.in_channels * spec.kernel[0] * spec.kernel[1]
            bound = np.sqrt(6.0 / fan_in)
            w.data = rng.uniform(-bound, bound, size=w.shape).astype(np.float32)
            b.data = np.zeros(b.shape, np.float32)

    def forward(self, contexts, target_shape):
        nb = len(self.branch_specs)
        branches = []
        for i, (spec, x) in enumerate(zip(self.branch_specs, contexts)):
            branches.append(nnet.conv2d(x, self.params[2 * i], self.params[2 * i + 1], spec, target_shape))
        h = nnet.relu(nnet.add(*branches)) if nb > 1 else nnet.relu(branches[0])
        for j, spec in enumerate(self.layer_specs):
            k = 2 * (nb + j)
            h = nnet.conv2d(h, self.params[k], self.params[k + 1], spec)
            if j < len(self.layer_specs) - 1:
                h = nnet.relu(h)
        return h


class ICNNWeights:
    """All heads of all interpolators (per weight set when not shared)."""

    def __init__(self, config):
        self.config = config
        self.heads = {}
        for s in range(config.weight_sets):
            for target in INTERPOLATORS:
                for head in HEADS:
                    self.heads[(s, target, head)] = HeadNet(target, config.head_outputs(head), config)

    def parameters(self):
        """Every parameter tensor, in serialisation order."""
        out = []
        for key in sorted(self.heads, key=_key_order):
            out.extend(self.heads[key].params)
        return out

    def named_parameters(self):
        for key in sorted(self.heads, key=_key_order):
            s, target, head = key
            for i, p in enumerate(self.heads[key].params):
                yield f"set{s}.icnn{target}.{head}.{i // 2}.{'weight' if i % 2 == 0 else 'bias'}", p

    def _slot(self, scale):
        if self.config.share_across_scales or scale is None:
            return 0
        if not 1 <= scale <= self.config.scales:
            raise ValueError(f"scale {scale} outside 1..{self.config.scales}")
        return scale - 1

    def forward(self, interp_id, contexts, target_shape, scale=None):
        """Raw head outputs for subband ``interp_id``.

        ``contexts`` are the real-valued context subbands in the order
        x00, x11, x01 (as many as the interpolator consumes), each
        ``(3, H, W)`` or ``(3, N, H, W)``; they are divided by
        ``INPUT_SCALE`` here. Returns a dict of Tensors keyed by head.
        """
        if interp_id not in CONTEXTS:
            raise ValueError(f"unknown interpolator {interp_id!r}")
        if len(contexts) != len(CONTEXTS[interp_id]):
            raise ValueError(
                f"icnn{interp_id} takes {len(CONTEXTS[interp_id])} context subbands, got {len(contexts)}"
            )
        dtype = self.parameters()[0].data.dtype
        xs = [np.asarray(c, dtype=dtype) / dtype.type(INPUT_SCALE) for c in contexts]
        slot = self._slot(scale)
        out = {}
        for head in HEADS:
            y = self.heads[(slot, interp_id, head)].forward(xs, target_shape)
            out[head] = nnet.scale(y, dtype.type(MU_SCALE)) if head == "mu" else y
        return out

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def num_parameters(self):
        return sum(p.data.size for p in self.parameters())

    def payload(self):
        return b"".join(np.ascontiguousarray(p.data, dtype="<f4").tobytes() for p in self.parameters())

    def checksum(self):
        """8-byte digest of config and float32 payload; stored in bitstreams."""
        h = hashlib.sha256(json.dumps(asdict(self.config), sort_keys=True).encode())
        h.update(self.payload())
        return h.digest()[:8]


def _key_order(key):
    s, target, head = key
    return s, INTERPOLATORS.index(target), HEADS.index(head)


def build(config=ICNNConfig(), seed=0):
    """Allocate and He-uniform initialise all interpolator weights."""
    w = ICNNWeights(config)
    rng = np.random.default_rng(seed)
    for key in sorted(w.heads, key=_key_order):
        w.heads[key].init(rng)
    return w


def count_params(config=ICNNConfig()):
    """Analytic scalar parameter count (matches ``build(config).num_parameters()``)."""
    c = config.channels
    total = 0
    for target in INTERPOLATORS:
        for head in HEADS:
            for ctx in CONTEXTS[target]:
                rows, cols = TAP_RANGES[(ctx, target)]
                total += 3 * len(rows) * len(cols) * c + c
            total += (config.layers - 2) * (c * c + c)
            out = config.head_outputs(head)
            total += c * out + out
    return total * config.weight_sets


def macs_per_target_pixel(config, target):
    c = config.channels
    macs = 0
    for head in HEADS:
        for ctx in CONTEXTS[target]:
            rows, cols = TAP_RANGES[(ctx, target)]
            macs += 3 * len(rows) * len(cols) * c
        macs += (config.layers - 2) * c * c
        macs += c * config.head_outputs(head)
    return macs


def count_macs(config, image_h, image_w):
    """Multiply-accumulates of all head forwards over all scales, in KMAC per image pixel.

    Biases and activations are not counted.
    """
    total = 0
    for shapes in pyramid_shapes(image_h, image_w, config.scales):
        for target in INTERPOLATORS:
            h, w = shapes[target]
            total += h * w * macs_per_target_pixel(config, target)
    return total / (image_h * image_w) / 1000.0


def save_weights(weights, path):
    """Write ``weights`` as: magic, version byte, u32 header length, JSON header, float32 payload."""
    payload = weights.payload()
    header = {
        "config": asdict(weights.config),
        "tensors": [[name, list(p.shape)] for name, p in weights.named_parameters()],
        "dtype": "<f4",
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    hbytes = json.dumps(header, indent=1).encode()
    with open(path, "wb") as f:
        f.write(WEIGHTS_MAGIC)
        f.write(struct.pack("<BI", WEIGHTS_VERSION, len(hbytes)))
        f.write(hbytes)
        f.write(payload)


def load_weights(path, config=None):
    """Read a weight file; optionally insist on a particular ``config``."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 9 or data[:4] != WEIGHTS_MAGIC:
        raise FormatError(f"{path}: not an LLTW weight file")
    version, hlen = struct.unpack_from("<BI", data, 4)
    if version != WEIGHTS_VERSION:
        raise FormatError(f"{path}: weight format version {version}, expected {WEIGHTS_VERSION}")
    try:
        header = json.loads(data[9:9 + hlen].decode())
        file_config = ICNNConfig(**header["config"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"{path}: unreadable header ({e})") from None
    if config is not None and file_config != config:
        raise FormatError(f"{path}: weights are for {file_config}, expected {config}")
    payload = data[9 + hlen:]
    if hashlib.sha256(payload).hexdigest() != header.get("sha256"):
        raise FormatError(f"{path}: payload checksum mismatch (truncated or corrupted)")
    w = ICNNWeights(file_config)
    params = list(w.named_parameters())
    if [[n, list(p.shape)] for n, p in params] != header["tensors"]:
        raise FormatError(f"{path}: tensor table does not match config {file_config}")
    expected = 4 * sum(p.data.size for _, p in params)
    if len(payload) != expected:
        raise FormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    off = 0
    for _, p in params:
        n = p.data.size
        p.data = np.frombuffer(payload, dtype="<f4", count=n, offset=off).astype(np.float32).reshape(p.shape)
        off += 4 * n
    return w
