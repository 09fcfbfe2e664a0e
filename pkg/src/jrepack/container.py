"""Repacked file format: JPEG -> coefficient buckets -> MSAC/RLRG streams, and back.

See FORMAT.md at the repository root for the byte layout.
"""

from __future__ import annotations

import struct
import zlib
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .buckets import N_BUCKETS, delta_dc, inverse_delta_dc
from .coders.rangecoder import RangeDecoder, RangeEncoder
from .coders.rlrg import rlrg_decode, rlrg_encode
from .errors import (
    CorruptContainer,
    EncodingOverflow,
    JrepackError,
    SymbolOutOfAlphabet,
    VersionMismatch,
)
from .jpeg import BlockGrid, QuantizedImage, extract_scan, parse_headers, parse_jpeg, serialize_jpeg
from .predictor import FIXED_SIZE, SCALE, VARIANCE, PredictorParams, SigmaState, partner_map
from .tables import A_MAX, A_MIN, LaplaceTableSet, build_tables

MAGIC = b"JRPK"
VERSION = 1

FLAG_CROSS_BUCKET = 0x01
FLAG_SORT = 0x02
FLAG_VARIANCE = 0x04
FLAG_FALLBACK = 0x08
_KNOWN_FLAGS = 0x0F

MSAC = "msac"
RLRG = "rlrg"
DEFAULT_THRESHOLD = 0.75

_MAX_META = 1 << 26

# Preset dictionary for the deflated header blob: a JFIF APP0 segment and the
# four DHT segments of the example Huffman tables that libjpeg writes by
# default.  Headers using them shrink to a handful of bytes.
HEADER_DICTIONARY = bytes.fromhex(
    "ffe000104a46494600010100000100010000ffc4001f00000105010101010101000000000000"
    "00000102030405060708090a0bffc400b5100002010303020403050504040000017d01020300"
    "041105122131410613516107227114328191a1082342b1c11552d1f02433627282090a161718"
    "191a25262728292a3435363738393a434445464748494a535455565758595a63646566676869"
    "6a737475767778797a838485868788898a92939495969798999aa2a3a4a5a6a7a8a9aab2b3b4"
    "b5b6b7b8b9bac2c3c4c5c6c7c8c9cad2d3d4d5d6d7d8d9dae1e2e3e4e5e6e7e8e9eaf1f2f3f4"
    "f5f6f7f8f9faffc4001f0100030101010101010101010000000000000102030405060708090a"
    "0bffc400b5110002010204040304070504040001027700010203110405213106124151076171"
    "1322328108144291a1b1c109233352f0156272d10a162434e125f11718191a262728292a3536"
    "3738393a434445464748494a535455565758595a636465666768696a737475767778797a8283"
    "8485868788898a92939495969798999aa2a3a4a5a6a7a8a9aab2b3b4b5b6b7b8b9bac2c3c4c5"
    "c6c7c8c9cad2d3d4d5d6d7d8d9dae2e3e4e5e6e7e8e9eaf2f3f4f5f6f7f8f9fa"
)


def gain_percent(original_size, new_size):
    """Compression gain ``(1 - new/original) * 100``."""
    if original_size <= 0:
        raise ValueError("original size must be positive")
    return (1.0 - new_size / original_size) * 100.0


def zero_fraction(values):
    v = np.asarray(values.values if hasattr(values, "values") else values)
    return float(np.count_nonzero(v == 0)) / v.size if v.size else 1.0


def select_coder(bucket, threshold=DEFAULT_THRESHOLD):
    """RLRG when the zero fraction strictly exceeds ``threshold``, else MSAC."""
    v = np.asarray(bucket.values if hasattr(bucket, "values") else bucket)
    # Integer comparison keeps 768/1024 vs 0.75 exact.
    zeros = int(np.count_nonzero(v == 0))
    return RLRG if zeros > threshold * v.size else MSAC


def sort_permutation(previous):
    """Block order by descending ``|previous|``; ties keep ascending block index."""
    prev = np.abs(np.asarray(previous, dtype=np.int64))
    return np.argsort(-prev, kind="stable")


def sort_rlrg_bucket(values, previous):
    """Reorder ``values`` by :func:`sort_permutation` of ``previous``.

    Returns ``(permuted_values, permutation)``; ``permuted[j] = values[perm[j]]``.
    """
    perm = sort_permutation(previous)
    return np.asarray(values)[perm], perm


def unsort_rlrg_bucket(permuted, previous):
    perm = sort_permutation(previous)
    out = np.empty(len(perm), dtype=np.int64)
    out[perm] = np.asarray(permuted, dtype=np.int64)
    return out


@dataclass
class CompressInfo:
    """Side information about one :func:`compress` call."""

    fallback: bool = False
    fallback_reason: str = ""
    bitmaps: list = field(default_factory=list)
    header_bytes: int = 0
    stream_bytes: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# Little helpers for the byte layout


def _varint(n):
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptContainer("container truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def varint(self):
        shift = 0
        n = 0
        while True:
            (b,) = self.take(1)
            n |= (b & 0x7F) << shift
            if not b & 0x80:
                return n
            shift += 7
            if shift > 35:
                raise CorruptContainer("length prefix too long")


def _deflate(data):
    c = zlib.compressobj(9, zlib.DEFLATED, -15, zdict=HEADER_DICTIONARY)
    return c.compress(data) + c.flush()


def _inflate(data):
    d = zlib.decompressobj(-15, zdict=HEADER_DICTIONARY)
    try:
        out = d.decompress(data, _MAX_META)
    except zlib.error as e:
        raise CorruptContainer(f"header blob: {e}") from None
    if d.unconsumed_tail or not d.eof or d.unused_data:
        raise CorruptContainer("header blob malformed")
    return out


def _pack_partners(partners):
    bits = 0
    for k, m in enumerate(partners):
        bits |= (m & 0x3F) << (6 * k)
    return bits.to_bytes(48, "little")


def _unpack_partners(blob):
    bits = int.from_bytes(blob, "little")
    partners = [(bits >> (6 * k)) & 0x3F for k in range(N_BUCKETS)]
    if any(partners[k] >= k for k in range(1, N_BUCKETS)) or partners[0]:
        raise CorruptContainer("partner map refers to an uncoded bucket")
    return partners


def _flags_for(params, sort):
    flags = 0
    if params.cross_bucket:
        flags |= FLAG_CROSS_BUCKET
    if sort:
        flags |= FLAG_SORT
    if params.mode == VARIANCE:
        flags |= FLAG_VARIANCE
    return flags


def _header(flags, params, pre, post):
    meta = _deflate(struct.pack("<I", len(pre)) + pre + post)
    return (
        MAGIC
        + struct.pack("<BB", VERSION, flags)
        + params.to_fixed()
        + struct.pack("<I", len(meta))
        + meta
    )


# ---------------------------------------------------------------------------
# Per-component coding


def _encode_msac(values, k, state, tables):
    enc = RangeEncoder(tables.total_bits)
    encode = enc.encode
    cums = tables.cumulative
    thr = tables.magnitude_thresholds
    estimate = state.estimate
    update = state.update
    state.begin_bucket(k)
    for i, x in enumerate(values):
        if not A_MIN <= x <= A_MAX:
            raise SymbolOutOfAlphabet(f"symbol {x} outside the alphabet")
        d, s = estimate(k, i)
        cum = cums[bisect_right(thr, s)]
        j = x - A_MIN
        lo = cum[j]
        encode(lo, cum[j + 1] - lo)
        update(k, i, x, d)
    state.end_bucket(k)
    return enc.finish()


def _decode_msac(payload, k, n, state, tables):
    dec = RangeDecoder(payload, tables.total_bits)
    decode = dec.decode
    cums = tables.cumulative
    thr = tables.magnitude_thresholds
    estimate = state.estimate
    update = state.update
    state.begin_bucket(k)
    out = [0] * n
    for i in range(n):
        d, s = estimate(k, i)
        x = decode(cums[bisect_right(thr, s)]) + A_MIN
        out[i] = x
        update(k, i, x, d)
    state.end_bucket(k)
    dec.finish()
    return out


def _coded_buckets(grid: BlockGrid):
    zz = grid.zigzag().astype(np.int64)
    cols = [zz[:, k] for k in range(N_BUCKETS)]
    cols[0] = delta_dc(cols[0])
    return cols


def _encode_component(grid, params, tables, coder, threshold, sort, info):
    bw, bh = grid.blocks_wide, grid.blocks_high
    cols = _coded_buckets(grid)
    if coder == MSAC:
        rlrg_mask = 0
    elif coder == RLRG:
        rlrg_mask = (1 << N_BUCKETS) - 1
    else:
        rlrg_mask = sum(1 << k for k in range(N_BUCKETS) if select_coder(cols[k], threshold) == RLRG)
    partners = partner_map(cols) if params.cross_bucket else None
    state = SigmaState(bw, bh, params, partners)
    parts = [struct.pack("<HHQ", bw, bh, rlrg_mask)]
    if partners is not None:
        parts.append(_pack_partners(partners))
    sizes = []
    for k in range(N_BUCKETS):
        values = cols[k].tolist()
        if rlrg_mask >> k & 1:
            seq = values
            if sort and k:
                seq = sort_rlrg_bucket(cols[k], cols[k - 1])[0].tolist()
            stream = rlrg_encode(seq)
            state.record_bucket(k, values)
            state.end_bucket(k)
        else:
            stream = _encode_msac(values, k, state, tables)
        sizes.append(len(stream))
        parts.append(_varint(len(stream)) + stream)
    info.bitmaps.append(rlrg_mask)
    info.stream_bytes.append(sizes)
    return b"".join(parts)


def _decode_component(reader, shape, params, tables, sort):
    bw, bh, rlrg_mask = reader.unpack("<HHQ")
    if (bw, bh) != shape:
        raise CorruptContainer("component grid does not match the frame header")
    partners = _unpack_partners(reader.take(48)) if params.cross_bucket else None
    n = bw * bh
    state = SigmaState(bw, bh, params, partners)
    cols = []
    for k in range(N_BUCKETS):
        payload = reader.take(reader.varint())
        if rlrg_mask >> k & 1:
            values = rlrg_decode(payload, n)
            if sort and k:
                values = unsort_rlrg_bucket(values, cols[k - 1]).tolist()
            state.record_bucket(k, values)
            state.end_bucket(k)
        else:
            values = _decode_msac(payload, k, n, state, tables)
        cols.append(values)
    zz = np.array(cols, dtype=np.int64).T
    zz[:, 0] = inverse_delta_dc(zz[:, 0])
    if zz.size and (zz.min() < -32768 or zz.max() > 32767):
        raise CorruptContainer("decoded coefficient out of range")
    return BlockGrid.from_zigzag(zz.astype(np.int16), bw, bh)


# ---------------------------------------------------------------------------
# Public API


def compress(
    jpeg_bytes,
    params: PredictorParams = None,
    *,
    threshold=DEFAULT_THRESHOLD,
    coder="auto",
    sort=True,
    tables: LaplaceTableSet = None,
    verify=True,
    info: CompressInfo = None,
) -> bytes:
    """Repack a baseline JPEG.

    ``coder`` is ``"auto"`` (zero-fraction rule), ``"msac"`` or ``"rlrg"``.
    ``sort`` reorders RLRG buckets by the magnitudes of the preceding bucket.
    With ``verify`` the result is decoded again in memory and, should it not
    reproduce the input exactly, a container carrying the original scan
    verbatim is returned instead.  Raises :class:`UnsupportedJpeg` or
    :class:`CorruptStream` for inputs the parser rejects.
    """
    data = bytes(jpeg_bytes)
    if coder not in ("auto", MSAC, RLRG):
        raise ValueError(f"unknown coder {coder!r}")
    params = (params or PredictorParams()).quantized()
    tables = tables or build_tables()
    info = info if info is not None else CompressInfo()
    img = parse_jpeg(data)
    st = img.structure
    pre, post = st.pre_scan, st.post_scan

    def fallback(reason):
        _, scan, _ = extract_scan(data)
        info.fallback = True
        info.fallback_reason = reason
        head = _header(_flags_for(params, False) | FLAG_FALLBACK, params, pre, post)
        info.header_bytes = len(head)
        return head + struct.pack("<I", len(scan)) + scan

    try:
        if serialize_jpeg(img) != data:
            return fallback("scan is not reproduced by canonical re-encoding")
        head = _header(_flags_for(params, sort), params, pre, post)
        body = [
            _encode_component(g, params, tables, coder, threshold, sort, info)
            for g in img.components
        ]
    except (EncodingOverflow, SymbolOutOfAlphabet) as e:
        return fallback(str(e))
    out = head + b"".join(body)
    info.header_bytes = len(head)
    if verify:
        try:
            ok = decompress(out, tables=tables) == data
        except JrepackError as e:  # pragma: no cover - defensive
            ok = False
            info.fallback_reason = str(e)
        if not ok:
            return fallback("self-check mismatch")
    _, scan, _ = extract_scan(data)
    if len(out) > len(head) + 4 + len(scan):
        return fallback("repacked streams larger than the original scan")
    return out


def read_header(blob):
    """Parse the fixed header; returns ``(flags, params, pre, post, reader)``."""
    blob = bytes(blob)
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise CorruptContainer("not a repacked JPEG (bad magic)")
    version, flags = r.unpack("<BB")
    if version != VERSION:
        raise VersionMismatch(f"container version {version}, expected {VERSION}")
    if flags & ~_KNOWN_FLAGS:
        raise CorruptContainer("unknown flag bits set")
    try:
        params = PredictorParams.from_fixed(
            r.take(FIXED_SIZE),
            mode=VARIANCE if flags & FLAG_VARIANCE else SCALE,
            cross_bucket=bool(flags & FLAG_CROSS_BUCKET),
        )
    except JrepackError as e:
        raise CorruptContainer(f"bad predictor parameters: {e}") from None
    (meta_len,) = r.unpack("<I")
    meta = _inflate(r.take(meta_len))
    if len(meta) < 4:
        raise CorruptContainer("header blob too short")
    (pre_len,) = struct.unpack_from("<I", meta)
    if 4 + pre_len > len(meta):
        raise CorruptContainer("header blob too short")
    return flags, params, meta[4:4 + pre_len], meta[4 + pre_len:], r


def decompress(container_bytes, *, tables: LaplaceTableSet = None) -> bytes:
    """Rebuild the original JPEG bytes.  Raises :class:`CorruptContainer`."""
    flags, params, pre, post, r = read_header(container_bytes)
    if flags & FLAG_FALLBACK:
        (n,) = r.unpack("<I")
        scan = r.take(n)
        if r.pos != len(r.data):
            raise CorruptContainer("trailing bytes after the scan")
        return pre + scan + post
    tables = tables or build_tables()
    try:
        structure, start = parse_headers(pre)
    except JrepackError as e:
        raise CorruptContainer(f"stored JPEG headers: {e}") from None
    if start != len(pre):
        raise CorruptContainer("stored JPEG headers have trailing bytes")
    structure.post_scan = post
    sort = bool(flags & FLAG_SORT)
    try:
        grids = [
            _decode_component(r, structure.grid_shape(i), params, tables, sort)
            for i in range(len(structure.components))
        ]
    except CorruptContainer:
        raise
    except JrepackError as e:
        raise CorruptContainer(f"payload: {e}") from None
    if r.pos != len(r.data):
        raise CorruptContainer("trailing bytes after the last stream")
    try:
        return serialize_jpeg(QuantizedImage(structure, grids))
    except (JrepackError, ValueError, KeyError) as e:
        raise CorruptContainer(f"cannot rebuild scan: {e}") from None
