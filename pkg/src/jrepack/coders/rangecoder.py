"""Multisymbol arithmetic coding with a byte-oriented range coder.

The coder keeps a 64-bit ``low``/``range`` pair and renormalises one byte at a
time whenever ``range`` drops below 2**56, so a table total of up to 2**32
still leaves at least 24 bits of precision per division.  Carries are
propagated through a cached byte plus a count of pending 0xFF bytes.

Stream layout: the encoder emits exactly ``R + 1`` bytes, where ``R`` is the
number of renormalisation shifts, and the decoder reads ``R + 8`` bytes
(the last 7 implicitly zero).  That identity is checked at the end of
decoding, which catches truncated as well as over-long payloads.
"""

from __future__ import annotations

from bisect import bisect_right

from ..errors import CorruptStream, SymbolOutOfAlphabet
from ..tables import A_MAX, A_MIN, LaplaceTableSet

_BITS = 64
_MASK = (1 << _BITS) - 1
_TOP = 1 << (_BITS - 8)
_SHIFT = _BITS - 8
_CARRY_LIMIT = 0xFF << _SHIFT
_TAIL = _BITS // 8 - 1


class RangeEncoder:
    def __init__(self, total_bits=32):
        if total_bits > _BITS - 24:
            raise ValueError("table total too large for the coder precision")
        self.total_bits = total_bits
        self.low = 0
        self.range = _MASK
        self._cache = 0
        self._pending = 0
        self._out = bytearray()

    def _shift_low(self):
        low = self.low
        if low < _CARRY_LIMIT or low > _MASK:
            carry = low >> _BITS
            out = self._out
            out.append((self._cache + carry) & 0xFF)
            if self._pending:
                out.extend(bytes([(0xFF + carry) & 0xFF]) * self._pending)
                self._pending = 0
            self._cache = (low >> _SHIFT) & 0xFF
        else:
            self._pending += 1
        self.low = (low << 8) & _MASK

    def encode(self, cum, freq):
        """Narrow the interval to ``[cum, cum + freq)`` out of ``2**total_bits``."""
        r = self.range >> self.total_bits
        self.low += r * cum
        rng = r * freq
        while rng < _TOP:
            self._shift_low()
            rng <<= 8
        self.range = rng

    def finish(self) -> bytes:
        # Any value in [low, low + range) identifies the stream; pick the one
        # with only its top byte non-zero so the tail can be left implicit.
        self.low = (self.low + _TOP - 1) & ~(_TOP - 1)
        self._shift_low()
        self._shift_low()
        out = bytes(self._out)
        if out[0] != 0:
            raise AssertionError("carry escaped into the leading byte")
        return out[1:]


class RangeDecoder:
    def __init__(self, data, total_bits=32):
        self.data = bytes(data)
        self.total_bits = total_bits
        self.pos = 0
        self.range = _MASK
        code = 0
        for _ in range(_BITS // 8):
            code = (code << 8) | self._next()
        self.code = code

    def _next(self):
        pos = self.pos
        self.pos = pos + 1
        if pos < len(self.data):
            return self.data[pos]
        if pos >= len(self.data) + _TAIL:
            raise CorruptStream("range coder payload ended prematurely")
        return 0

    def decode(self, cumulative):
        """Decode one symbol index given a cumulative table (list, ends at total)."""
        r = self.range >> self.total_bits
        target = self.code // r
        if target >> self.total_bits:
            raise CorruptStream("range coder target outside the table")
        s = bisect_right(cumulative, target) - 1
        lo = cumulative[s]
        self.code -= r * lo
        rng = r * (cumulative[s + 1] - lo)
        while rng < _TOP:
            self.code = (self.code << 8) | self._next()
            rng <<= 8
        self.range = rng
        return s

    def finish(self):
        """Check that exactly the encoder's bytes were consumed."""
        if self.pos != len(self.data) + _TAIL:
            raise CorruptStream("range coder payload length mismatch")


def msac_encode(symbols, sigma_levels, tables: LaplaceTableSet) -> bytes:
    """Arithmetic-code ``symbols``, each with the table of its level."""
    if len(symbols) != len(sigma_levels):
        raise ValueError("one level per symbol is required")
    enc = RangeEncoder(tables.total_bits)
    cums = tables.cumulative
    for x, level in zip(symbols, sigma_levels):
        x = int(x)
        if not A_MIN <= x <= A_MAX:
            raise SymbolOutOfAlphabet(f"symbol {x} outside [{A_MIN}, {A_MAX}]")
        cum = cums[level]
        i = x - A_MIN
        enc.encode(cum[i], cum[i + 1] - cum[i])
    return enc.finish()


def msac_decode(data, count, sigma_levels, tables: LaplaceTableSet):
    """Inverse of :func:`msac_encode` for a known level sequence."""
    if len(sigma_levels) != count:
        raise ValueError("one level per symbol is required")
    dec = RangeDecoder(data, tables.total_bits)
    cums = tables.cumulative
    out = [dec.decode(cums[level]) + A_MIN for level in sigma_levels]
    dec.finish()
    return out


def code_length_bits(symbols, sigma_levels, tables: LaplaceTableSet):
    """Ideal code length, sum of ``-log2 p``, under the tables actually used."""
    import math

    total = 0.0
    cums = tables.cumulative
    for x, level in zip(symbols, sigma_levels):
        cum = cums[level]
        i = int(x) - A_MIN
        total -= math.log2((cum[i + 1] - cum[i]) / tables.total)
    return total
