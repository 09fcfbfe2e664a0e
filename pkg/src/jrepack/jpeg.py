"""Baseline JPEG parsing down to quantized DCT coefficients, and the way back.

Only the entropy-coded scan is interpreted.  Every other byte of the file is
kept verbatim, so :func:`serialize_jpeg` reproduces the input exactly as long
as the scan was produced by a conforming encoder (canonical run-length coding,
1-bit padding before markers and at the end of the scan).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptStream, EncodingOverflow, UnsupportedJpeg
from .zigzag import INVERSE_ZIGZAG, ZIGZAG

COEF_MIN = -2048
COEF_MAX = 2047

# Beyond this many blocks a file is rejected before allocating anything.
MAX_BLOCKS = 1 << 22

_SOF_UNSUPPORTED = {
    0xC1: "extended sequential",
    0xC2: "progressive",
    0xC3: "lossless",
    0xC5: "hierarchical",
    0xC6: "hierarchical",
    0xC7: "hierarchical",
    0xC9: "arithmetic-coded",
    0xCA: "arithmetic-coded",
    0xCB: "arithmetic-coded",
    0xCD: "arithmetic-coded",
    0xCE: "arithmetic-coded",
    0xCF: "arithmetic-coded",
}
# Markers that carry no length field.
_STANDALONE = {0x01} | set(range(0xD0, 0xD8))


@dataclass(frozen=True)
class HuffmanTable:
    """A DHT table as transmitted: code counts per length and symbol values."""

    counts: tuple
    symbols: tuple

    def code_lengths(self):
        """Return ``{symbol: (code, length)}`` for the canonical code."""
        codes = {}
        code = 0
        k = 0
        for length in range(1, 17):
            for _ in range(self.counts[length - 1]):
                codes[self.symbols[k]] = (code, length)
                code += 1
                k += 1
            code <<= 1
        return codes


@dataclass(frozen=True)
class ComponentSpec:
    id: int
    h: int
    v: int
    quant_table: int
    dc_table: int = 0
    ac_table: int = 0


@dataclass
class JpegStructure:
    """Everything about a JPEG file except its quantized coefficients.

    Attributes
    ----------
    pre_scan_segments : list of bytes
        SOI and every marker segment up to and including the SOS header,
        exactly as they appear in the file.
    post_scan : bytes
        Bytes following the entropy-coded data, normally ``FFD9`` plus
        whatever trailer the file carries.
    restart_interval : int
        MCUs per restart interval, 0 when restart markers are not used.
    components : list of ComponentSpec
        Frame components in frame order, with the table selectors from SOS.
    scan_order : list of int
        Indices into ``components`` in the order the scan interleaves them.
    """

    pre_scan_segments: list
    post_scan: bytes
    restart_interval: int
    components: list
    scan_order: list
    dc_tables: dict
    ac_tables: dict
    width: int
    height: int
    precision: int = 8

    @property
    def pre_scan(self):
        return b"".join(self.pre_scan_segments)

    @property
    def post_eoi_trailer(self):
        """Bytes after the EOI marker (empty for a clean file)."""
        i = self.post_scan.find(b"\xff\xd9")
        return self.post_scan[i + 2:] if i >= 0 else b""

    @property
    def hmax(self):
        return max(c.h for c in self.components)

    @property
    def vmax(self):
        return max(c.v for c in self.components)

    @property
    def interleaved(self):
        return len(self.scan_order) > 1

    def mcu_counts(self):
        """Return ``(mcus_wide, mcus_high)`` of the scan."""
        if self.interleaved:
            return (-(-self.width // (8 * self.hmax)), -(-self.height // (8 * self.vmax)))
        return self.grid_shape(self.scan_order[0])

    def grid_shape(self, index):
        """Return ``(blocks_wide, blocks_high)`` of component ``index``."""
        c = self.components[index]
        if self.interleaved:
            mw, mh = self.mcu_counts()
            return mw * c.h, mh * c.v
        cw = -(-self.width * c.h // self.hmax)
        ch = -(-self.height * c.v // self.vmax)
        return -(-cw // 8), -(-ch // 8)


@dataclass
class BlockGrid:
    """Quantized coefficients of one component, shape ``(bh, bw, 64)``.

    The last axis is in natural (row-major) order inside the 8x8 block.
    """

    coefficients: np.ndarray

    @property
    def blocks_high(self):
        return self.coefficients.shape[0]

    @property
    def blocks_wide(self):
        return self.coefficients.shape[1]

    @property
    def n_blocks(self):
        return self.blocks_high * self.blocks_wide

    def zigzag(self):
        """Coefficients reshaped to ``(n_blocks, 64)`` in zigzag order."""
        return self.coefficients.reshape(-1, 64)[:, ZIGZAG]

    @classmethod
    def from_zigzag(cls, zz, blocks_wide, blocks_high):
        zz = np.asarray(zz).reshape(blocks_high * blocks_wide, 64)
        natural = zz[:, INVERSE_ZIGZAG].reshape(blocks_high, blocks_wide, 64)
        return cls(np.ascontiguousarray(natural, dtype=np.int16))


@dataclass
class QuantizedImage:
    structure: JpegStructure
    components: list = field(default_factory=list)

    def __eq__(self, other):
        if not isinstance(other, QuantizedImage):
            return NotImplemented
        return (
            self.structure == other.structure
            and len(self.components) == len(other.components)
            and all(
                np.array_equal(a.coefficients, b.coefficients)
                for a, b in zip(self.components, other.components)
            )
        )


# ---------------------------------------------------------------------------
# Header parsing


def _u16(data, pos):
    if pos + 2 > len(data):
        raise CorruptStream("truncated marker segment")
    return (data[pos] << 8) | data[pos + 1]


def _parse_dht(payload, dc_tables, ac_tables):
    pos = 0
    while pos < len(payload):
        tc_th = payload[pos]
        tc, th = tc_th >> 4, tc_th & 15
        if tc > 1 or th > 3:
            raise CorruptStream(f"bad DHT class/id {tc_th:#x}")
        if pos + 17 > len(payload):
            raise CorruptStream("truncated DHT")
        counts = tuple(payload[pos + 1:pos + 17])
        n = sum(counts)
        if n > 256 or pos + 17 + n > len(payload):
            raise CorruptStream("bad DHT symbol count")
        symbols = tuple(payload[pos + 17:pos + 17 + n])
        code = 0
        for length, cnt in enumerate(counts, start=1):
            code += cnt
            if code > (1 << length):
                raise CorruptStream("over-subscribed Huffman code")
            code <<= 1
        (ac_tables if tc else dc_tables)[th] = HuffmanTable(counts, symbols)
        pos += 17 + n


def _parse_sof(payload):
    if len(payload) < 6:
        raise CorruptStream("truncated SOF")
    precision, height, width, nf = struct.unpack(">BHHB", payload[:6])
    if precision != 8:
        raise UnsupportedJpeg(f"{precision}-bit samples")
    if nf not in (1, 3):
        raise UnsupportedJpeg(f"{nf} components")
    if height == 0 or width == 0:
        raise UnsupportedJpeg("zero image dimension (DNL) not supported")
    if len(payload) < 6 + 3 * nf:
        raise CorruptStream("truncated SOF")
    comps = []
    for i in range(nf):
        cid, hv, tq = payload[6 + 3 * i:9 + 3 * i]
        h, v = hv >> 4, hv & 15
        if not (1 <= h <= 4 and 1 <= v <= 4) or tq > 3:
            raise CorruptStream("bad component sampling or table id")
        if any(c.id == cid for c in comps):
            raise CorruptStream("duplicate component id")
        comps.append(ComponentSpec(cid, h, v, tq))
    return width, height, comps


def parse_headers(data):
    """Walk the marker segments of ``data`` up to the end of the SOS header.

    Returns ``(structure, scan_start)``; ``structure.post_scan`` is left
    empty.  Raises :class:`UnsupportedJpeg` or :class:`CorruptStream`.
    """
    data = bytes(data)
    if data[:2] != b"\xff\xd8":
        raise CorruptStream("missing SOI marker")
    segments = [data[:2]]
    pos = 2
    dc_tables, ac_tables, quant_ids = {}, {}, set()
    frame = None
    restart = 0
    while True:
        start = pos
        if pos >= len(data) or data[pos] != 0xFF:
            raise CorruptStream(f"expected marker at offset {pos}")
        while pos < len(data) and data[pos] == 0xFF:
            pos += 1
        if pos >= len(data):
            raise CorruptStream("truncated before SOS")
        marker = data[pos]
        pos += 1
        if marker in _STANDALONE:
            if marker != 0x01:
                raise CorruptStream("restart marker outside scan")
            segments.append(data[start:pos])
            continue
        if marker in (0xD8, 0xD9, 0x00):
            raise CorruptStream(f"unexpected marker {marker:#x} before SOS")
        length = _u16(data, pos)
        if length < 2 or pos + length > len(data):
            raise CorruptStream("bad segment length")
        payload = data[pos + 2:pos + length]
        pos += length
        segments.append(data[start:pos])
        if marker in _SOF_UNSUPPORTED:
            raise UnsupportedJpeg(f"{_SOF_UNSUPPORTED[marker]} JPEG (SOF{marker - 0xC0})")
        if marker in (0xC8, 0xCC):
            raise UnsupportedJpeg("arithmetic coding / JPG extensions")
        if marker == 0xC0:
            if frame is not None:
                raise CorruptStream("multiple frame headers")
            frame = _parse_sof(payload)
        elif marker == 0xC4:
            _parse_dht(payload, dc_tables, ac_tables)
        elif marker == 0xDB:
            p = 0
            while p < len(payload):
                pq, tq = payload[p] >> 4, payload[p] & 15
                if pq > 1 or tq > 3:
                    raise CorruptStream("bad DQT")
                quant_ids.add(tq)
                p += 1 + 64 * (pq + 1)
            if p != len(payload):
                raise CorruptStream("truncated DQT")
        elif marker == 0xDD:
            if len(payload) != 2:
                raise CorruptStream("bad DRI length")
            restart = _u16(payload, 0)
        elif marker == 0xDA:
            if frame is None:
                raise CorruptStream("SOS before frame header")
            structure = _parse_sos(payload, frame, dc_tables, ac_tables, quant_ids)
            structure.pre_scan_segments = segments
            structure.restart_interval = restart
            return structure, pos


def _parse_sos(payload, frame, dc_tables, ac_tables, quant_ids):
    width, height, comps = frame
    if not payload:
        raise CorruptStream("empty SOS")
    ns = payload[0]
    if len(payload) != 4 + 2 * ns:
        raise CorruptStream("bad SOS length")
    if ns != len(comps):
        raise UnsupportedJpeg("multi-scan baseline JPEG (scan does not cover all components)")
    ss, se, ahal = payload[1 + 2 * ns:4 + 2 * ns]
    if ss != 0 or se != 63 or ahal != 0:
        raise UnsupportedJpeg("spectral selection / successive approximation")
    order = []
    comps = list(comps)
    for i in range(ns):
        cid, tables = payload[1 + 2 * i], payload[2 + 2 * i]
        idx = next((j for j, c in enumerate(comps) if c.id == cid), None)
        if idx is None or idx in order:
            raise CorruptStream("SOS references unknown component")
        td, ta = tables >> 4, tables & 15
        if td not in dc_tables or ta not in ac_tables:
            raise CorruptStream("scan uses an undefined Huffman table")
        if comps[idx].quant_table not in quant_ids:
            raise CorruptStream("component uses an undefined quantization table")
        c = comps[idx]
        comps[idx] = ComponentSpec(c.id, c.h, c.v, c.quant_table, td, ta)
        order.append(idx)
    if ns > 1 and sum(comps[i].h * comps[i].v for i in order) > 10:
        raise CorruptStream("more than 10 blocks per MCU")
    return JpegStructure(
        pre_scan_segments=[],
        post_scan=b"",
        restart_interval=0,
        components=comps,
        scan_order=order,
        dc_tables={i: dc_tables[comps[i].dc_table] for i in order},
        ac_tables={i: ac_tables[comps[i].ac_table] for i in order},
        width=width,
        height=height,
    )


# ---------------------------------------------------------------------------
# Scan decoding


def split_scan(data, start):
    """Locate the entropy-coded data beginning at ``start``.

    Returns ``(end, segments, markers)`` where ``segments`` are the raw
    (still byte-stuffed) chunks between restart markers and ``markers`` the
    RSTn numbers in order of appearance.
    """
    segments, markers = [], []
    seg_start = pos = start
    n = len(data)
    while True:
        pos = data.find(b"\xff", pos)
        if pos < 0 or pos + 1 >= n:
            raise CorruptStream("scan is not terminated by a marker")
        nxt = data[pos + 1]
        if nxt == 0x00:
            pos += 2
        elif 0xD0 <= nxt <= 0xD7:
            segments.append(data[seg_start:pos])
            markers.append(nxt - 0xD0)
            pos += 2
            seg_start = pos
        else:
            segments.append(data[seg_start:pos])
            return pos, segments, markers


def _build_lut(table):
    """16-bit lookup: ``lut[peek] = (length << 8) | symbol`` or -1."""
    lut = [-1] * 65536
    code = 0
    k = 0
    for length in range(1, 17):
        span = 1 << (16 - length)
        for _ in range(table.counts[length - 1]):
            entry = (length << 8) | table.symbols[k]
            lo = code * span
            lut[lo:lo + span] = [entry] * span
            code += 1
            k += 1
        code <<= 1
    return lut


def _bits_of(segment):
    raw = segment.replace(b"\xff\x00", b"\xff")
    nbits = 8 * len(raw)
    if not raw:
        return "1" * 64, 0
    return format(int.from_bytes(raw, "big"), f"0{nbits}b") + "1" * 64, nbits


def _decode_interval(bits, nbits, mcu_blocks, flats, preds, dc_luts, ac_luts):
    """Decode one restart interval; ``mcu_blocks`` lists (comp, flat base)."""
    pos = 0
    for comp, base in mcu_blocks:
        flat = flats[comp]
        look = dc_luts[comp][int(bits[pos:pos + 16], 2)]
        if look < 0:
            raise CorruptStream("invalid DC Huffman code")
        pos += look >> 8
        s = look & 0xFF
        if s:
            if s > 11:
                raise CorruptStream("DC difference category out of range")
            v = int(bits[pos:pos + s], 2)
            pos += s
            if v < 1 << (s - 1):
                v -= (1 << s) - 1
            dc = preds[comp] + v
            if not COEF_MIN <= dc <= COEF_MAX:
                raise CorruptStream("DC coefficient out of range")
            preds[comp] = dc
        flat[base] = preds[comp]
        ac_lut = ac_luts[comp]
        k = 1
        while k < 64:
            look = ac_lut[int(bits[pos:pos + 16], 2)]
            if look < 0:
                raise CorruptStream("invalid AC Huffman code")
            pos += look >> 8
            rs = look & 0xFF
            s = rs & 15
            if s == 0:
                if rs == 0xF0:
                    k += 16
                    if k > 64:
                        raise CorruptStream("zero run past end of block")
                    continue
                if rs:
                    raise CorruptStream(f"undefined AC symbol {rs:#x}")
                break
            k += rs >> 4
            if k > 63 or s > 10:
                raise CorruptStream("AC coefficient index or size out of range")
            v = int(bits[pos:pos + s], 2)
            pos += s
            if v < 1 << (s - 1):
                v -= (1 << s) - 1
            flat[base + k] = v
            k += 1
        if pos > nbits:
            raise CorruptStream("truncated scan")
    return pos


def _mcu_layout(structure, mcu_index):
    """Yield ``(component, block flat index)`` for one MCU."""
    mw, _ = structure.mcu_counts()
    my, mx = divmod(mcu_index, mw)
    if not structure.interleaved:
        return [(structure.scan_order[0], mcu_index)]
    out = []
    for ci in structure.scan_order:
        c = structure.components[ci]
        bw = mw * c.h
        for v in range(c.v):
            row = (my * c.v + v) * bw + mx * c.h
            for h in range(c.h):
                out.append((ci, row + h))
    return out


def parse_jpeg(data) -> QuantizedImage:
    """Decode a baseline JPEG into quantized DCT coefficients.

    DC differences are accumulated into absolute DC values (predictors are
    reset at every restart marker).  Raises :class:`UnsupportedJpeg` for
    anything but single-scan baseline Huffman files with 1 or 3 components,
    and :class:`CorruptStream` for malformed data.
    """
    data = bytes(data)
    structure, scan_start = parse_headers(data)
    end, segments, markers = split_scan(data, scan_start)
    structure.post_scan = data[end:]
    _check_post_scan(structure.post_scan)

    mw, mh = structure.mcu_counts()
    n_mcus = mw * mh
    shapes = [structure.grid_shape(i) for i in range(len(structure.components))]
    total_blocks = sum(w * h for w, h in shapes)
    if total_blocks > MAX_BLOCKS:
        raise UnsupportedJpeg("image too large")
    # Each block needs at least a DC code and an EOB code.
    if 2 * total_blocks > 8 * (end - scan_start) + 8 * len(segments):
        raise CorruptStream("scan too short for the frame size")

    ri = structure.restart_interval
    n_intervals = -(-n_mcus // ri) if ri else 1
    if len(segments) != n_intervals:
        raise CorruptStream(
            f"expected {n_intervals} restart intervals, found {len(segments)}"
        )
    if any(m != i % 8 for i, m in enumerate(markers)):
        raise CorruptStream("restart markers out of sequence")

    flats = {i: [0] * (64 * shapes[i][0] * shapes[i][1]) for i in structure.scan_order}
    dc_luts = {i: _build_lut(t) for i, t in structure.dc_tables.items()}
    ac_luts = {i: _build_lut(t) for i, t in structure.ac_tables.items()}
    per_interval = ri if ri else n_mcus
    for seg_index, segment in enumerate(segments):
        first = seg_index * per_interval
        last = min(first + per_interval, n_mcus)
        layout = [
            (ci, 64 * b) for m in range(first, last) for ci, b in _mcu_layout(structure, m)
        ]
        bits, nbits = _bits_of(segment)
        preds = dict.fromkeys(structure.scan_order, 0)
        _decode_interval(bits, nbits, layout, flats, preds, dc_luts, ac_luts)

    grids = []
    for i, (bw, bh) in enumerate(shapes):
        zz = np.array(flats[i], dtype=np.int16)
        grids.append(BlockGrid.from_zigzag(zz, bw, bh))
    return QuantizedImage(structure, grids)


def _check_post_scan(post):
    pos = 0
    while pos < len(post) and post[pos] == 0xFF:
        pos += 1
    if pos >= len(post):
        return  # file truncated right after the scan; tolerated
    marker = post[pos]
    if marker == 0xD9:
        return
    if marker == 0xDA:
        raise UnsupportedJpeg("multiple scans")
    if marker == 0xDC:
        raise UnsupportedJpeg("DNL marker")
    # Any other marker between scan and EOI is kept verbatim.
    if post.find(b"\xff\xda") >= 0:
        raise UnsupportedJpeg("multiple scans")


# ---------------------------------------------------------------------------
# Scan encoding


def _value_bits(v):
    s = abs(v).bit_length()
    if v < 0:
        v += (1 << s) - 1
    return s, format(v, f"0{s}b") if s else ""


def _code_strings(table):
    return {sym: format(code, f"0{length}b") for sym, (code, length) in table.code_lengths().items()}


def _encode_interval(mcu_blocks, zz, dc_codes, ac_codes):
    parts = []
    append = parts.append
    preds = {}
    for comp, b in mcu_blocks:
        block = zz[comp][b]
        dc = block[0]
        diff = dc - preds.get(comp, 0)
        preds[comp] = dc
        s, vb = _value_bits(diff)
        try:
            append(dc_codes[comp][s])
        except KeyError:
            raise EncodingOverflow(f"no DC code for category {s}") from None
        append(vb)
        codes = ac_codes[comp]
        run = 0
        try:
            for k in range(1, 64):
                v = block[k]
                if v == 0:
                    run += 1
                    continue
                while run > 15:
                    append(codes[0xF0])
                    run -= 16
                s, vb = _value_bits(v)
                if s > 10:
                    raise EncodingOverflow("AC coefficient too large for baseline")
                append(codes[(run << 4) | s])
                append(vb)
                run = 0
            if run:
                append(codes[0x00])
        except KeyError as exc:
            raise EncodingOverflow(f"no AC code for symbol {exc.args[0]:#x}") from None
    bits = "".join(parts)
    bits += "1" * (-len(bits) % 8)
    if not bits:
        return b""
    raw = int(bits, 2).to_bytes(len(bits) // 8, "big")
    return raw.replace(b"\xff", b"\xff\x00")


def encode_scan(img: QuantizedImage) -> bytes:
    """Huffman-encode the coefficients of ``img`` into entropy-coded scan bytes."""
    st = img.structure
    zz = {}
    for i in st.scan_order:
        g = img.components[i]
        if (g.blocks_wide, g.blocks_high) != st.grid_shape(i):
            raise ValueError("component grid does not match the frame geometry")
        zz[i] = g.zigzag().tolist()
    dc_codes = {i: _code_strings(t) for i, t in st.dc_tables.items()}
    ac_codes = {i: _code_strings(t) for i, t in st.ac_tables.items()}
    mw, mh = st.mcu_counts()
    n_mcus = mw * mh
    ri = st.restart_interval or n_mcus
    out = []
    for seg_index, first in enumerate(range(0, n_mcus, ri)):
        if seg_index:
            out.append(bytes((0xFF, 0xD0 + (seg_index - 1) % 8)))
        layout = [b for m in range(first, min(first + ri, n_mcus)) for b in _mcu_layout(st, m)]
        out.append(_encode_interval(layout, zz, dc_codes, ac_codes))
    return b"".join(out)


def serialize_jpeg(img: QuantizedImage) -> bytes:
    """Rebuild the JPEG byte stream: verbatim headers, re-encoded scan, verbatim tail."""
    for g in img.components:
        c = g.coefficients
        if c.size and (c.min() < COEF_MIN or c.max() > COEF_MAX):
            raise EncodingOverflow("coefficient outside the baseline range")
    return img.structure.pre_scan + encode_scan(img) + img.structure.post_scan


def extract_scan(data):
    """Return ``(pre_scan, scan, post_scan)`` byte ranges of a JPEG file."""
    data = bytes(data)
    _, start = parse_headers(data)
    end, _, _ = split_scan(data, start)
    return data[:start], data[start:end], data[end:]
