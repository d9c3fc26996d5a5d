"""Range coder driven by 16-bit quantized CDF tables, plus fixed-length bits.

The range coder is the carry-less-at-the-decoder, cache+carry encoder layout
popularised by LZMA: a 33-bit ``low`` accumulator, a 32-bit ``range`` kept at
or above 2**24 by byte-wise renormalisation, and a pending-byte cache that
absorbs carries. Exact constants and the flush procedure are in FORMAT.md.
"""

import bisect

from .errors import CorruptStreamError

PRECISION = 16
TOTAL = 1 << PRECISION
_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


class RangeEncoder:
    """Encode symbols given their cumulative interval ``[start, start + freq)``.

    ``start``/``freq`` are counts out of ``2**16``. A symbol whose interval
    ends at 2**16 also receives the rounding slack of the current range.
    """

    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()
        self.symbols = 0

    def _shift_low(self):
        if self.low < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            temp = self._cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if self._cache_size == 0:
                    break
            self._cache = (self.low >> 24) & 0xFF
        self._cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode(self, start, freq):
        if freq <= 0 or start < 0 or start + freq > TOTAL:
            raise ValueError(f"encode: bad interval start={start} freq={freq}")
        r = self.range >> PRECISION
        self.low += r * start
        if start + freq == TOTAL:
            self.range -= r * start
        else:
            self.range = r * freq
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()
        self.symbols += 1

    def encode_symbol(self, cdf, sym_index):
        """Encode ``sym_index`` under the cumulative table ``cdf`` (length N + 1)."""
        if not 0 <= sym_index < len(cdf) - 1:
            raise ValueError(f"encode_symbol: index {sym_index} outside alphabet of {len(cdf) - 1}")
        lo = int(cdf[sym_index])
        self.encode(lo, int(cdf[sym_index + 1]) - lo)

    def finish(self):
        """Flush the state and return the coded bytes.

        The first byte the LZMA layout emits is always zero; it is dropped
        here and re-inserted implicitly by the decoder.
        """
        for _ in range(5):
            self._shift_low()
        out = bytes(self._out)
        assert not out or out[0] == 0
        return out[1:]


class RangeDecoder:
    """Mirror of :class:`RangeEncoder` over an in-memory buffer."""

    def __init__(self, data, offset=0):
        self._data = data
        self._pos = offset
        self.range = _MASK32
        self.code = 0
        for _ in range(4):
            self.code = (self.code << 8) | self._next_byte()

    def _next_byte(self):
        if self._pos >= len(self._data):
            raise CorruptStreamError("range decoder ran past the end of the stream")
        b = self._data[self._pos]
        self._pos += 1
        return b

    @property
    def position(self):
        return self._pos

    def decode_target(self):
        """Return the cumulative count the next symbol's interval contains."""
        self._r = self.range >> PRECISION
        return min(self.code // self._r, TOTAL - 1)

    def consume(self, start, freq):
        r = self._r
        self.code -= r * start
        if start + freq == TOTAL:
            self.range -= r * start
        else:
            self.range = r * freq
        if self.code < 0 or self.code >= self.range:
            raise CorruptStreamError("range decoder desynchronised")
        while self.range < _TOP:
            self.code = ((self.code << 8) | self._next_byte()) & _MASK32
            self.range <<= 8

    def decode_symbol(self, cdf):
        """Decode one symbol index under ``cdf`` (a length N + 1 sequence)."""
        target = self.decode_target()
        s = bisect.bisect_right(cdf, target) - 1
        lo = int(cdf[s])
        self.consume(lo, int(cdf[s + 1]) - lo)
        return s


class BitWriter:
    """MSB-first bit sink."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._nbits = 0

    def write(self, value, nbits):
        if nbits < 0 or not 0 <= value < (1 << nbits):
            raise ValueError(f"write_fixed: {value} does not fit in {nbits} bits")
        self._acc = (self._acc << nbits) | value
        self._nbits += nbits
        while self._nbits >= 8:
            self._nbits -= 8
            self._buf.append((self._acc >> self._nbits) & 0xFF)
        self._acc &= (1 << self._nbits) - 1

    def getvalue(self):
        """Bytes written so far, zero-padded to a byte boundary."""
        if self._nbits:
            return bytes(self._buf) + bytes([(self._acc << (8 - self._nbits)) & 0xFF])
        return bytes(self._buf)


class BitReader:
    """MSB-first bit source over a byte buffer."""

    def __init__(self, data, offset=0):
        self._data = data
        self._pos = offset
        self._acc = 0
        self._nbits = 0

    def read(self, nbits):
        while self._nbits < nbits:
            if self._pos >= len(self._data):
                raise CorruptStreamError("fixed-length segment truncated")
            self._acc = (self._acc << 8) | self._data[self._pos]
            self._pos += 1
            self._nbits += 8
        self._nbits -= nbits
        value = self._acc >> self._nbits
        self._acc &= (1 << self._nbits) - 1
        return value

    @property
    def position(self):
        """Byte offset just past the last byte touched."""
        return self._pos


def write_fixed(sink, value, nbits):
    sink.write(value, nbits)


def read_fixed(source, nbits):
    return source.read(nbits)
