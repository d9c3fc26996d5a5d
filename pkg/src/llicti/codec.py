"""Encode/decode pipeline and bitstream container.

Stream layout (all integers little-endian; see FORMAT.md)::

    header | coarsest subband, 8-bit RGB | range-coded subbands

Subbands are coded from the coarsest scale down, and within a scale in the
order x11, x01, x10. Inside a subband, all Y values go first, then Co (means
shifted by the decoded Y), then Cg.
"""

import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import probmodel
from .coder import BitReader, BitWriter, RangeDecoder, RangeEncoder
from .colorspace import rgb_to_ycocgr, ycocgr_to_rgb
from .errors import CorruptStreamError, FormatError
from .interpolator import CONTEXTS, INTERPOLATORS
from .pyramid import build_pyramid, merge, pyramid_shapes

MAGIC = b"LLTI"
VERSION = 1
DEFAULT_SCALES = 5
_HEAD = struct.Struct("<4sBBII8sI")
FLAT_CHECKSUM = bytes(8)


def header_size(scales):
    return _HEAD.size + 4 * scales


@dataclass
class Header:
    scales: int
    height: int
    width: int
    checksum: bytes
    image_crc: int
    symbol_counts: list

    def pack(self):
        return _HEAD.pack(
            MAGIC, VERSION, self.scales, self.height, self.width, self.checksum, self.image_crc
        ) + struct.pack(f"<{self.scales}I", *self.symbol_counts)

    @classmethod
    def unpack(cls, data):
        if len(data) < _HEAD.size:
            raise FormatError("stream shorter than its header")
        magic, version, scales, h, w, checksum, crc = _HEAD.unpack_from(data)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise FormatError(f"unsupported stream version {version}, expected {VERSION}")
        if scales < 1 or h < 1 or w < 1:
            raise FormatError(f"invalid header: scales={scales} size={h}x{w}")
        if len(data) < header_size(scales):
            raise FormatError("stream shorter than its header")
        counts = list(struct.unpack_from(f"<{scales}I", data, _HEAD.size))
        return cls(scales, h, w, checksum, crc, counts)


def expected_symbol_counts(h, w, scales):
    return [3 * sum(a * b for t, (a, b) in s.items() if t != "00") for s in pyramid_shapes(h, w, scales)]


def _check_image(image):
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ValueError("cannot encode an empty image")
    if img.dtype != np.uint8:
        if not np.issubdtype(img.dtype, np.integer) or img.min() < 0 or img.max() > 255:
            raise ValueError("expected 8-bit RGB samples")
        img = img.astype(np.uint8)
    return img


def _scales_for(weights, scales):
    if weights is None:
        return scales or DEFAULT_SCALES
    if scales not in (None, weights.config.scales):
        raise ValueError(f"weights are configured for {weights.config.scales} scales, not {scales}")
    return weights.config.scales


def _checksum(weights):
    return FLAT_CHECKSUM if weights is None else weights.checksum()


class _Tables:
    """Per-subband distribution source shared by encoder, decoder and estimator."""

    def __init__(self, weights, threads=None):
        self.weights = weights
        self.threads = threads or 1

    def params(self, target, contexts, shape, scale):
        if self.weights is None:
            return None
        raw = self.weights.forward(target, contexts, shape, scale)
        return probmodel.activate(*(raw[h].data for h in ("pi", "mu", "sigma", "alpha")))

    @staticmethod
    def channel(params, c, band):
        """Flattened ``(P, K)`` weights/means/scales for channel ``c``.

        ``band`` must already hold the true values of channels ``< c``.
        """
        if c > 0:
            params = probmodel.update_means(params, band[0], band[1])
        k = params.mixtures
        w, mu, sg = params.channel(c)
        return w.reshape(-1, k), mu.reshape(-1, k), sg.reshape(-1, k)

    def cdfs(self, params, c, band):
        support = probmodel.CHANNEL_SUPPORTS[c]
        if params is None:
            return None
        w, mu, sg = self.channel(params, c, band)
        if self.threads <= 1 or len(w) < 4096:
            return probmodel.quantize_cdf(w, mu, sg, support)
        bounds = np.linspace(0, len(w), self.threads + 1).astype(int)
        parts = [(w[a:b], mu[a:b], sg[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ThreadPoolExecutor(self.threads) as pool:
            out = list(pool.map(lambda p: probmodel.quantize_cdf(*p, support), parts))
        return np.concatenate(out)


def _flat_cdf(c):
    return probmodel.uniform_cdf(probmodel.CHANNEL_SUPPORTS[c])


def _walk_subbands(pyr, tables):
    """Yield ``(scale, target, band, params)`` in coding order."""
    for i in range(pyr.scales, 0, -1):
        for target in INTERPOLATORS:
            band = pyr.band(i, target)
            if band.shape[-1] == 0 or band.shape[-2] == 0:
                continue
            contexts = [pyr.band(i, name) for name in CONTEXTS[target]]
            yield i, target, band, tables.params(target, contexts, band.shape[-2:], i)


def encode(image, weights=None, scales=None, threads=None):
    """Compress an ``(H, W, 3)`` uint8 RGB image.

    ``weights=None`` selects the flat (uniform PMF) model.
    """
    rgb = _check_image(image)
    s = _scales_for(weights, scales)
    h, w = rgb.shape[:2]
    planes = rgb_to_ycocgr(rgb).transpose(2, 0, 1)
    pyr = build_pyramid(planes, s)

    sink = BitWriter()
    for v in rgb[:: 1 << s, :: 1 << s].reshape(-1).tolist():
        sink.write(v, 8)

    tables = _Tables(weights, threads)
    enc = RangeEncoder()
    counts = [0] * s
    for i, _target, band, params in _walk_subbands(pyr, tables):
        for c in range(3):
            support = probmodel.CHANNEL_SUPPORTS[c]
            sym = (band[c] - support.lo).reshape(-1)
            cdf = tables.cdfs(params, c, band)
            if cdf is None:
                flat = _flat_cdf(c)
                starts, ends = flat[sym], flat[sym + 1]
            else:
                rows = np.arange(len(sym))
                starts, ends = cdf[rows, sym], cdf[rows, sym + 1]
            for a, b in zip(starts.tolist(), (ends - starts).tolist()):
                enc.encode(a, b)
            counts[i - 1] += len(sym)
    header = Header(s, h, w, _checksum(weights), zlib.crc32(rgb.tobytes()), counts)
    payload = enc.finish() if enc.symbols else b""
    return header.pack() + sink.getvalue() + payload


def decode(data, weights=None, threads=None):
    """Reconstruct the RGB image from an :func:`encode` stream."""
    data = bytes(data)
    hdr = Header.unpack(data)
    if hdr.checksum != _checksum(weights):
        what = "the flat model" if hdr.checksum == FLAT_CHECKSUM else f"weights {hdr.checksum.hex()}"
        have = "no weights" if weights is None else f"weights {weights.checksum().hex()}"
        raise FormatError(f"stream was coded with {what}, decoder has {have}")
    s = _scales_for(weights, None) if weights is not None else hdr.scales
    if s != hdr.scales:
        raise FormatError(f"stream has {hdr.scales} scales, weights expect {s}")
    if hdr.symbol_counts != expected_symbol_counts(hdr.height, hdr.width, s):
        raise FormatError("per-scale symbol counts disagree with the image size")

    shapes = pyramid_shapes(hdr.height, hdr.width, s)
    ch, cw = shapes[-1]["00"]
    src = BitReader(data, header_size(s))
    coarse = np.array([src.read(8) for _ in range(ch * cw * 3)], dtype=np.int32).reshape(ch, cw, 3)
    x00 = rgb_to_ycocgr(coarse).transpose(2, 0, 1)

    tables = _Tables(weights, threads)
    dec = RangeDecoder(data, src.position) if sum(hdr.symbol_counts) else None
    for i in range(s, 0, -1):
        bands = {"00": x00}
        for target in INTERPOLATORS:
            bh, bw = shapes[i - 1][target]
            band = np.zeros((3, bh, bw), dtype=np.int32)
            bands[target] = band
            if bh == 0 or bw == 0:
                continue
            contexts = [bands[name] for name in CONTEXTS[target]]
            params = tables.params(target, contexts, (bh, bw), i)
            for c in range(3):
                lo = probmodel.CHANNEL_SUPPORTS[c].lo
                cdf = tables.cdfs(params, c, band)
                out = band[c].reshape(-1)
                if cdf is None:
                    flat = _flat_cdf(c)
                    for p in range(out.size):
                        out[p] = dec.decode_symbol(flat) + lo
                else:
                    for p in range(out.size):
                        row = cdf[p]
                        t = dec.decode_target()
                        sym = int(np.searchsorted(row, t, side="right")) - 1
                        dec.consume(int(row[sym]), int(row[sym + 1] - row[sym]))
                        out[p] = sym + lo
        x00 = merge(x00, bands["01"], bands["10"], bands["11"])
    end = dec.position if dec is not None else src.position
    if end != len(data):
        raise CorruptStreamError(f"{len(data) - end} unexpected trailing bytes")
    try:
        rgb = ycocgr_to_rgb(x00.transpose(1, 2, 0)).astype(np.uint8)
    except ValueError as e:
        raise CorruptStreamError(f"decoded samples out of range ({e})") from None
    if zlib.crc32(rgb.tobytes()) != hdr.image_crc:
        raise CorruptStreamError("decoded image fails its CRC check")
    return rgb


@dataclass
class RateEstimate:
    """Model code lengths, in bits, without running the entropy coder."""

    height: int
    width: int
    scales: int
    fixed_bits: int
    header_bits: int
    scale_bits: dict = field(default_factory=dict)
    subband_bits: dict = field(default_factory=dict)

    @property
    def pixels(self):
        return self.height * self.width

    @property
    def model_bits(self):
        return sum(self.scale_bits.values())

    @property
    def total_bits(self):
        return self.model_bits + self.fixed_bits + self.header_bits

    @property
    def bpp(self):
        return self.total_bits / self.pixels

    @property
    def bpsp(self):
        return self.bpp / 3

    def scale_bpp(self):
        """Bits of each scale over all image pixels, finest scale first."""
        return {i: self.scale_bits[i] / self.pixels for i in range(1, self.scales + 1)}


def estimate_bits(image, weights=None, scales=None):
    """Ideal code length under the model, plus fixed-length and header bits.

    Model bits use ``probmodel.bits`` (real PMF, floored at ``P_MIN``).
    """
    rgb = _check_image(image)
    s = _scales_for(weights, scales)
    h, w = rgb.shape[:2]
    pyr = build_pyramid(rgb_to_ycocgr(rgb).transpose(2, 0, 1), s)
    ch, cw = pyr.coarsest.shape[-2:]
    est = RateEstimate(h, w, s, fixed_bits=8 * 3 * ch * cw, header_bits=8 * header_size(s))
    est.scale_bits = {i: 0.0 for i in range(1, s + 1)}
    tables = _Tables(weights)
    for i, target, band, params in _walk_subbands(pyr, tables):
        for c in range(3):
            support = probmodel.CHANNEL_SUPPORTS[c]
            if params is None:
                b = band[c].size * np.log2(support.size)
            else:
                wk, mu, sg = tables.channel(params, c, band)
                b = float(probmodel.bits(band[c].reshape(-1), wk, mu, sg, support).sum())
            est.subband_bits[(i, target, c)] = b
            est.scale_bits[i] += b
    return est
