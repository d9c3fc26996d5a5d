"""Discretized Gaussian mixture over integer sub-pixel values.

Layout convention for a block of ``P`` pixels (any spatial shape ``...``):

* ``weights``, ``means``, ``scales``: ``(3, ..., K)``, channel-major (Y, Co, Cg)
* ``coeffs``: ``(3, ..., K')`` holding the cross-channel coefficients
  (a, b, c); ``K' = 1`` when they are shared by all mixture components

Mass outside ``[lo, hi]`` is folded onto the edge symbols so every PMF sums
to one over its finite alphabet.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import log_ndtr, ndtr

from .colorspace import YCC_RANGES
from .coder import TOTAL

SIGMA_MIN = 0.01
SIGMA_MAX = 2048.0
LOG_SIGMA_MIN = math.log(SIGMA_MIN)
LOG_SIGMA_MAX = math.log(SIGMA_MAX)
P_MIN = 2.0 ** -20
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


@dataclass(frozen=True)
class SymbolSupport:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty support [{self.lo}, {self.hi}]")

    @property
    def size(self):
        return self.hi - self.lo + 1


CHANNEL_SUPPORTS = tuple(SymbolSupport(lo, hi) for lo, hi in YCC_RANGES)


@dataclass(frozen=True)
class DistParams:
    weights: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    coeffs: np.ndarray

    @property
    def mixtures(self):
        return self.weights.shape[-1]

    def channel(self, c):
        return self.weights[c], self.means[c], self.scales[c]


def _split_heads(raw, k):
    """``(3K, ...)`` head maps -> ``(3, ..., K)``."""
    raw = np.asarray(raw)
    spatial = raw.shape[1:]
    return np.moveaxis(raw.reshape((3, k) + spatial), 1, -1)


def activate(pi_raw, mu_raw, sigma_raw, alpha_raw):
    """Turn raw interpolator head outputs into :class:`DistParams`.

    Inputs are the head maps for one subband, shaped ``(3K, H, W)`` (or
    ``(3, H, W)`` / ``(3K, H, W)`` for ``alpha_raw``).
    """
    for name, arr in (("pi", pi_raw), ("mu", mu_raw), ("sigma", sigma_raw), ("alpha", alpha_raw)):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"activate: non-finite values in {name} head output")
    k = np.shape(pi_raw)[0] // 3
    logits = _split_heads(pi_raw, k).astype(np.float64)
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=-1, keepdims=True)
    means = _split_heads(mu_raw, k).astype(np.float64)
    scales = np.exp(np.clip(_split_heads(sigma_raw, k).astype(np.float64), LOG_SIGMA_MIN, LOG_SIGMA_MAX))
    coeffs = _split_heads(alpha_raw, np.shape(alpha_raw)[0] // 3).astype(np.float64)
    return DistParams(w, means, scales, coeffs)


def update_means(params, y_val, co_val):
    """Condition Co on decoded Y and Cg on decoded Y and Co.

    ``y_val`` and ``co_val`` are the true integer values at each pixel.
    """
    a, b, c = params.coeffs[0], params.coeffs[1], params.coeffs[2]
    y = np.asarray(y_val, dtype=np.float64)
    co = np.asarray(co_val, dtype=np.float64)
    means = params.means.copy()
    means[1] += a * y[..., None]
    means[2] += b * y[..., None] + c * co[..., None]
    return replace(params, means=means)


def _bin_prob(x, mu, sigma, lo, hi):
    """Per-component probability of integer ``x`` under N(mu, sigma), edges folded.

    Computed on whichever side of the mean avoids cancellation.
    """
    x = np.asarray(x, dtype=np.float64)
    z_hi = np.where(x >= hi, np.inf, (x + 0.5 - mu) / sigma)
    z_lo = np.where(x <= lo, -np.inf, (x - 0.5 - mu) / sigma)
    upper = z_lo > 0
    return np.where(upper, ndtr(-z_lo) - ndtr(-z_hi), ndtr(z_hi) - ndtr(z_lo))


def pmf(x, weights, means, scales, support):
    """Mixture probability of integer symbol(s) ``x``; mixture axis is last."""
    x = np.asarray(x)
    if np.any(x < support.lo) or np.any(x > support.hi):
        raise ValueError(f"pmf: symbol outside support [{support.lo}, {support.hi}]")
    xb = x[..., None]
    return np.sum(weights * _bin_prob(xb, means, scales, support.lo, support.hi), axis=-1)


def bits(x, weights, means, scales, support):
    """Code length ``-log2 pmf`` with the PMF floored at ``P_MIN``."""
    p = pmf(x, weights, means, scales, support)
    return -np.log2(np.maximum(p, P_MIN))


def log_bin_prob(x, mu, sigma, lo, hi):
    """Natural log of the folded bin probability, stable far into the tails.

    Returns ``(logp, dlogp_dzhi, dlogp_dzlo, z_hi, z_lo)`` so callers can
    chain gradients without recomputing anything.
    """
    x = np.asarray(x, dtype=mu.dtype)
    with np.errstate(invalid="ignore", divide="ignore"):
        z_hi = np.where(x >= hi, np.inf, (x + 0.5 - mu) / sigma)
        z_lo = np.where(x <= lo, -np.inf, (x - 0.5 - mu) / sigma)
        upper = z_lo > 0
        # mirror the upper tail so both log_ndtr arguments are <= their counterparts
        big = np.where(upper, -z_lo, z_hi)
        small = np.where(upper, -z_hi, z_lo)
        l_big = log_ndtr(big)
        l_small = log_ndtr(small)
        logp = l_big + np.log(-np.expm1(l_small - l_big))
        logpdf_hi = np.where(np.isinf(z_hi), -np.inf, -0.5 * z_hi * z_hi - _LOG_SQRT_2PI)
        logpdf_lo = np.where(np.isinf(z_lo), -np.inf, -0.5 * z_lo * z_lo - _LOG_SQRT_2PI)
        d_hi = np.exp(logpdf_hi - logp)
        d_lo = -np.exp(logpdf_lo - logp)
    return logp, d_hi, d_lo, z_hi, z_lo


def gmm_nll(logits, means, log_scales, coeffs, x):
    """Total negative log-likelihood (nats) of ``x`` and its gradients.

    Layout follows the raw head maps: ``logits``, ``means``, ``log_scales``
    are ``(3, K, ...)`` (log-scales before clamping), ``coeffs`` is
    ``(3, K', ...)`` with ``K'`` either 1 or K, and ``x`` is ``(3, ...)``
    integer YCoCg-R values. Cross-channel mean updates use the true values
    of the preceding channels.

    Returns ``(nll, grads)`` with ``grads`` in the order of the inputs.
    """
    out_dt = means.dtype
    # float32 tails lose the bin probability entirely; work in float64
    dt = np.float64
    logits, means, log_scales, coeffs = (np.asarray(a, dtype=dt) for a in (logits, means, log_scales, coeffs))
    x = np.asarray(x).astype(dt)
    y, co = x[0][None], x[1][None]
    mu = means.copy()
    mu[1] += coeffs[0] * y
    mu[2] += coeffs[1] * y + coeffs[2] * co

    sigma = np.exp(np.clip(log_scales, LOG_SIGMA_MIN, LOG_SIGMA_MAX))
    bshape = (3, 1) + (1,) * (x.ndim - 1)
    lo = np.array([s.lo for s in CHANNEL_SUPPORTS], dtype=dt).reshape(bshape)
    hi = np.array([s.hi for s in CHANNEL_SUPPORTS], dtype=dt).reshape(bshape)
    logp, d_hi, d_lo, z_hi, z_lo = log_bin_prob(x[:, None], mu, sigma, lo, hi)

    m = logits.max(axis=1, keepdims=True)
    log_w = logits - m - np.log(np.exp(logits - m).sum(axis=1, keepdims=True))
    joint = log_w + logp
    jm = joint.max(axis=1, keepdims=True)
    log_mix = jm + np.log(np.exp(joint - jm).sum(axis=1, keepdims=True))
    nll = -float(log_mix.sum(dtype=np.float64))
    if not np.isfinite(nll):
        raise FloatingPointError("gmm_nll: non-finite likelihood")

    resp = np.exp(joint - log_mix)
    g_logits = np.exp(log_w) - resp
    # d(-log p)/d(log bin_i) = -resp_i; infinite edges carry no gradient
    fin_hi = np.isfinite(z_hi)
    fin_lo = np.isfinite(z_lo)
    g_zhi = np.where(fin_hi, -resp * d_hi, 0.0)
    g_zlo = np.where(fin_lo, -resp * d_lo, 0.0)
    g_mu = -(g_zhi + g_zlo) / sigma
    g_logsig = -(g_zhi * np.where(fin_hi, z_hi, 0.0) + g_zlo * np.where(fin_lo, z_lo, 0.0))
    inside = (log_scales > LOG_SIGMA_MIN) & (log_scales < LOG_SIGMA_MAX)
    g_logsig = np.where(inside, g_logsig, 0.0)

    shared = coeffs.shape[1] == 1
    s1 = g_mu[1].sum(axis=0, keepdims=True) if shared else g_mu[1]
    s2 = g_mu[2].sum(axis=0, keepdims=True) if shared else g_mu[2]
    g_coeffs = np.stack([s1 * y, s2 * y, s2 * co])
    return nll, tuple(g.astype(out_dt, copy=False) for g in (g_logits, g_mu, g_logsig, g_coeffs))


def _mixture_cdf_edges(weights, means, scales, support):
    """Mixture CDF at the N-1 interior bin edges, shape ``(P, N - 1)``."""
    edges = np.arange(support.lo, support.hi, dtype=np.float64) + 0.5
    z = (edges[None, :, None] - means[:, None, :]) / scales[:, None, :]
    return np.einsum("pek,pk->pe", ndtr(z), weights)


def _apportion(p, total):
    """Largest-remainder integer apportionment of rows of ``p`` onto ``total``.

    Each symbol first gets 1, then the floor of its share of the rest; the
    leftover counts go to the largest fractional parts, lower index first
    among equals.
    """
    n = p.shape[1]
    avail = total - n
    p = np.maximum(p, 0.0)
    p = p / p.sum(axis=1, keepdims=True)
    scaled = p * avail
    base = np.floor(scaled).astype(np.int64)
    frac = scaled - base
    left = avail - base.sum(axis=1)
    # k-th largest remainder per row, then fill ties in index order
    kth = np.clip(n - left, 0, n - 1)
    thr = np.take_along_axis(np.sort(frac, axis=1), kth[:, None], axis=1)
    above = frac > thr
    tie = frac == thr
    room = left - above.sum(axis=1)
    extra = above | (tie & (np.cumsum(tie, axis=1) <= room[:, None]))
    extra[left == 0] = False
    return 1 + base + extra


def quantize_cdf(weights, means, scales, support, chunk=2048):
    """Integer cumulative tables, one row per pixel, each ending at 2**16.

    ``weights``/``means``/``scales`` have shape ``(P, K)`` (or ``(K,)`` for a
    single pixel). Every symbol gets frequency >= 1 and the remaining
    ``2**16 - N`` counts are apportioned by largest remainder, ties going to
    the lower symbol. Returns int64 ``(P, N + 1)``.
    """
    n = support.size
    if n > TOTAL:
        raise ValueError(f"quantize_cdf: {n} symbols exceed the 2**16 table capacity")
    single = np.ndim(weights) == 1
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    mu = np.atleast_2d(np.asarray(means, dtype=np.float64))
    sg = np.atleast_2d(np.asarray(scales, dtype=np.float64))
    out = np.empty((len(w), n + 1), dtype=np.int64)
    out[:, 0] = 0
    for s in range(0, len(w), chunk):
        e = slice(s, s + chunk)
        inner = _mixture_cdf_edges(w[e], mu[e], sg[e], support) if n > 1 else np.empty((len(w[e]), 0))
        cdf = np.concatenate([np.zeros((len(inner), 1)), inner, np.ones((len(inner), 1))], axis=1)
        freqs = _apportion(np.diff(cdf, axis=1), TOTAL)
        np.cumsum(freqs, axis=1, out=out[e, 1:])
    return out[0] if single else out


def uniform_cdf(support):
    """Quantized table for a flat PMF over ``support``."""
    p = np.full((1, support.size), 1.0 / support.size)
    freqs = _apportion(p, TOTAL)[0]
    return np.concatenate([[0], np.cumsum(freqs)])
