import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llicti.coder import TOTAL, BitReader, BitWriter, RangeDecoder, RangeEncoder, read_fixed, write_fixed
from llicti.errors import CorruptStreamError


def random_cdf(rng, n):
    freqs = 1 + rng.multinomial(TOTAL - n, rng.dirichlet(np.full(n, 0.3)))
    return np.concatenate([[0], np.cumsum(freqs)])


def code(symbols, cdfs):
    enc = RangeEncoder()
    for s, cdf in zip(symbols, cdfs):
        enc.encode_symbol(cdf, s)
    return enc.finish()


def decode_all(data, cdfs):
    dec = RangeDecoder(data)
    out = [dec.decode_symbol(cdf) for cdf in cdfs]
    return out, dec.position


def test_round_trip_1e5_random_cdfs(rng):
    tables = [random_cdf(rng, n).tolist() for n in (2, 5, 256, 511)]
    picks = rng.integers(0, len(tables), 100_000)
    cdfs = [tables[i] for i in picks]
    symbols = [int(rng.integers(0, len(c) - 1)) for c in cdfs]
    data = code(symbols, cdfs)
    out, pos = decode_all(data, cdfs)
    assert out == symbols
    assert pos == len(data)


def test_uniform_256_costs_one_byte_per_symbol(rng):
    cdf = list(range(0, TOTAL + 1, 256))
    n = 10_000
    symbols = rng.integers(0, 256, n).tolist()
    data = code(symbols, [cdf] * n)
    assert n <= len(data) <= n + 5
    assert decode_all(data, [cdf] * n)[0] == symbols


def test_deterministic(rng):
    cdf = random_cdf(rng, 17).tolist()
    symbols = rng.integers(0, 17, 500).tolist()
    assert code(symbols, [cdf] * 500) == code(symbols, [cdf] * 500)


def test_skewed_near_entropy(rng):
    # one symbol holding almost all the mass; carries and long 0xFF runs
    cdf = [0, TOTAL - 3, TOTAL - 2, TOTAL - 1, TOTAL]
    p = np.diff(cdf) / TOTAL
    n = 50_000
    symbols = rng.choice(4, n, p=p).tolist()
    data = code(symbols, [cdf] * n)
    entropy = -sum(math.log2(p[s]) for s in symbols)
    assert 8 * len(data) <= entropy + 0.01 * n + 32
    assert decode_all(data, [cdf] * n)[0] == symbols


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 300), st.integers(2, 600))
def test_round_trip_property(seed, n, alphabet):
    rng = np.random.default_rng(seed)
    cdf = random_cdf(rng, alphabet).tolist()
    symbols = rng.integers(0, alphabet, n).tolist()
    data = code(symbols, [cdf] * n)
    out, pos = decode_all(data, [cdf] * n)
    assert out == symbols and pos == len(data)


def test_bad_arguments():
    enc = RangeEncoder()
    with pytest.raises(ValueError):
        enc.encode_symbol([0, TOTAL], 1)
    with pytest.raises(ValueError):
        enc.encode(0, 0)
    with pytest.raises(ValueError):
        enc.encode(TOTAL - 1, 2)


def test_truncated_stream_detected(rng):
    cdf = random_cdf(rng, 256).tolist()
    symbols = rng.integers(0, 256, 2000).tolist()
    data = code(symbols, [cdf] * 2000)
    with pytest.raises(CorruptStreamError):
        decode_all(data[: len(data) // 2], [cdf] * 2000)


@given(st.lists(st.tuples(st.integers(0, 32), st.integers(0, 2**32 - 1)), max_size=50))
def test_bits_round_trip(items):
    items = [(n, v % (1 << n) if n else 0) for n, v in items]
    sink = BitWriter()
    for n, v in items:
        write_fixed(sink, v, n)
    src = BitReader(sink.getvalue())
    assert [read_fixed(src, n) for n, _ in items] == [v for _, v in items]
    assert src.position == len(sink.getvalue()) == math.ceil(sum(n for n, _ in items) / 8)


def test_bits_msb_first():
    sink = BitWriter()
    sink.write(1, 1)
    sink.write(0b0110, 4)
    assert sink.getvalue() == bytes([0b10110000])
    with pytest.raises(ValueError):
        sink.write(4, 2)
    src = BitReader(b"\x80")
    src.read(8)
    with pytest.raises(CorruptStreamError):
        src.read(1)
