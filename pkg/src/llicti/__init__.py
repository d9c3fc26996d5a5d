"""Lossless image compression with small interpolator CNNs.

An RGB image goes through YCoCg-R, a multi-scale even/odd pyramid, and per
subband a discretized Gaussian mixture whose parameters come from three
small CNNs. The mixtures drive a range coder.
"""

from .codec import decode, encode, estimate_bits
from .errors import CorruptStreamError, FormatError
from .interpolator import ICNNConfig, build, count_macs, count_params, load_weights, save_weights

__all__ = [
    "CorruptStreamError",
    "FormatError",
    "ICNNConfig",
    "build",
    "count_macs",
    "count_params",
    "decode",
    "encode",
    "estimate_bits",
    "load_weights",
    "save_weights",
]
__version__ = "0.1.0"
