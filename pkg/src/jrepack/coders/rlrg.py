"""Adaptive Run-Length / Golomb-Rice coding (Malvar's RLGR scheme).

Signed symbols are first interleaved to non-negative integers
(0, -1, 1, -2, ... -> 0, 1, 2, 3, ...).  Two backward-adapted parameters
drive the coder, both kept in fixed point with ``SCALE_BITS`` fractional
bits:

``kp`` (run parameter, ``k = kp >> SCALE_BITS``)
    ``k == 0``: no-run mode, every value is Golomb-Rice coded.  A zero
    raises ``kp`` by ``U0``, anything else lowers it by ``D0``.
    ``k > 0``: run mode.  A complete run of ``2**k`` zeros costs one ``0``
    bit and raises ``kp`` by ``U1``.  A run cut short by a non-zero value is
    sent as ``1`` + the run length in ``k`` bits + the value (minus one)
    Golomb-Rice coded, and lowers ``kp`` by ``D1``.

``krp`` (Golomb-Rice parameter, ``kr = krp >> SCALE_BITS``)
    After coding ``u`` with parameter ``kr`` and quotient ``p = u >> kr``:
    ``p == 0`` lowers ``krp`` by 2, ``p == 1`` keeps it, ``p > 1`` raises it
    by ``p + 1``.

Golomb-Rice codewords are ``p`` one-bits, a zero, then ``kr`` remainder bits,
MSB first.  Quotients of ``ESCAPE`` or more are sent as ``ESCAPE`` one-bits
followed by the raw 12-bit value.  A run still open at the end of the input
is flushed as a partial run with no trailing value; the decoder knows the
symbol count.
"""

from __future__ import annotations

from ..errors import CorruptStream, SymbolOutOfAlphabet
from ..tables import A_MAX, A_MIN

SCALE_BITS = 2
U0, D0, U1, D1 = 3, 1, 2, 1
KP_MAX = 15 << SCALE_BITS
KRP_MAX = 12 << SCALE_BITS
KRP_INIT = 1 << SCALE_BITS
ESCAPE = 20
RAW_BITS = 12


def interleave(x):
    return 2 * x if x >= 0 else -2 * x - 1


def deinterleave(u):
    return u >> 1 if u & 1 == 0 else -((u + 1) >> 1)


def rlrg_encode(symbols) -> bytes:
    parts = []
    append = parts.append
    kp = 0
    krp = KRP_INIT
    run = 0
    k = 0
    for x in symbols:
        x = int(x)
        if not A_MIN <= x <= A_MAX:
            raise SymbolOutOfAlphabet(f"symbol {x} outside [{A_MIN}, {A_MAX}]")
        k = kp >> SCALE_BITS
        if k and x == 0:
            run += 1
            if run == 1 << k:
                append("0")
                run = 0
                kp = min(kp + U1, KP_MAX)
            continue
        if k:
            append("1" + format(run, f"0{k}b"))
            run = 0
            u = interleave(x) - 1
            kp -= D1
        else:
            u = interleave(x)
            kp = min(kp + U0, KP_MAX) if u == 0 else max(kp - D0, 0)
        # Golomb-Rice with adaptive parameter.
        kr = krp >> SCALE_BITS
        p = u >> kr
        if p < ESCAPE:
            append("1" * p + "0")
            if kr:
                append(format(u & ((1 << kr) - 1), f"0{kr}b"))
        else:
            append("1" * ESCAPE + format(u, f"0{RAW_BITS}b"))
        if p == 0:
            krp = max(krp - 2, 0)
        elif p > 1:
            krp = min(krp + p + 1, KRP_MAX)
    if run:
        append("1" + format(run, f"0{k}b"))
    bits = "".join(parts)
    bits += "0" * (-len(bits) % 8)
    if not bits:
        return b""
    return int(bits, 2).to_bytes(len(bits) // 8, "big")


def rlrg_decode(data, count):
    data = bytes(data)
    nbits = 8 * len(data)
    bits = format(int.from_bytes(data, "big"), f"0{nbits}b") if data else ""
    out = []
    append = out.append
    pos = 0
    kp = 0
    krp = KRP_INIT
    n = 0
    while n < count:
        k = kp >> SCALE_BITS
        if k:
            if pos >= nbits:
                raise CorruptStream("RLRG payload ended prematurely")
            flag = bits[pos]
            pos += 1
            if flag == "0":
                m = 1 << k
                if n + m > count:
                    raise CorruptStream("RLRG run overruns the symbol count")
                out.extend([0] * m)
                n += m
                kp = min(kp + U1, KP_MAX)
                continue
            if pos + k > nbits:
                raise CorruptStream("RLRG payload ended prematurely")
            run = int(bits[pos:pos + k], 2)
            pos += k
            if n + run > count:
                raise CorruptStream("RLRG run overruns the symbol count")
            out.extend([0] * run)
            n += run
            if n == count:
                break
        kr = krp >> SCALE_BITS
        zero = bits.find("0", pos, pos + ESCAPE)
        if zero < 0:
            if pos + ESCAPE + RAW_BITS > nbits:
                raise CorruptStream("RLRG payload ended prematurely")
            u = int(bits[pos + ESCAPE:pos + ESCAPE + RAW_BITS], 2)
            pos += ESCAPE + RAW_BITS
            p = u >> kr
        else:
            p = zero - pos
            pos = zero + 1
            if kr:
                if pos + kr > nbits:
                    raise CorruptStream("RLRG payload ended prematurely")
                u = (p << kr) | int(bits[pos:pos + kr], 2)
                pos += kr
            else:
                u = p
        if p == 0:
            krp = max(krp - 2, 0)
        elif p > 1:
            krp = min(krp + p + 1, KRP_MAX)
        if k:
            x = deinterleave(u + 1)
            kp -= D1
        else:
            x = deinterleave(u)
            kp = min(kp + U0, KP_MAX) if u == 0 else max(kp - D0, 0)
        if not A_MIN <= x <= A_MAX:
            raise CorruptStream("RLRG value outside the alphabet")
        append(x)
        n += 1
    if (pos + 7) // 8 != len(data) or bits[pos:].strip("0"):
        raise CorruptStream("RLRG payload length mismatch")
    return out
