"""Discretised Laplace model and the precomputed frequency tables built from it.

The coefficient alphabet is fixed to ``[-2048, 2047]``.  For every level of a
logarithmic grid of scale parameters a cumulative frequency table with total
``2**total_bits`` is built once; the arithmetic coder only ever looks tables
up, so no floating point enters the coding loop.
"""

from __future__ import annotations

import hashlib
import lzma
import math
import struct
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import ConfigError, DomainError

A_MIN = -2048
A_MAX = 2047
ALPHABET_SIZE = A_MAX - A_MIN + 1

_BLOB_MAGIC = b"JRPT"
_BLOB_VERSION = 1

# xz-compressed ``to_bytes()`` dump of the default table set, shipped as the
# bit-exact reference for container format version 1.
REFERENCE_BLOB = "laplace_tables_v1.bin.xz"


def laplace_cdf(x, sigma):
    """Distribution function of the zero-mean Laplace law with scale ``sigma``."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    if x < 0:
        return 0.5 * math.exp(x / sigma)
    return 1.0 - 0.5 * math.exp(-x / sigma)


def symbol_prob(x, sigma):
    """Probability mass of integer ``x`` under the Laplace law discretised on unit bins.

    Equal to ``F(x + 0.5) - F(x - 0.5)``; evaluated in the tail-stable form so
    that ``symbol_prob(x) == symbol_prob(-x)`` holds exactly.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    a = abs(x)
    if a == 0:
        return -math.expm1(-0.5 / sigma)
    return 0.5 * (math.exp(-(a - 0.5) / sigma) - math.exp(-(a + 0.5) / sigma))


@dataclass(frozen=True)
class TableConfig:
    """Parameters of a table set.

    The defaults are the ones baked into container format version 1.
    ``total_bits`` must be at least 27 for the smallest default level to keep
    the mass of symbol 0 exact to the unit (see :func:`build_tables`).
    """

    n_levels: int = 64
    sigma_lo: float = 0.05
    sigma_hi: float = 256.0
    total_bits: int = 32
    prob_floor: int = 1
    sigma_levels: tuple = None

    def levels(self):
        if self.sigma_levels is not None:
            lv = np.asarray(self.sigma_levels, dtype=np.float64)
        else:
            lv = np.geomspace(self.sigma_lo, self.sigma_hi, self.n_levels)
        if lv.ndim != 1 or len(lv) == 0 or np.any(lv <= 0) or np.any(np.diff(lv) <= 0):
            raise ConfigError("sigma levels must be positive and strictly ascending")
        return lv


@dataclass(frozen=True, eq=False)
class LaplaceTableSet:
    """Cumulative frequency tables indexed by quantized scale level.

    ``cumulative[j]`` is a list of ``ALPHABET_SIZE + 1`` integers starting at
    0 and ending at ``total``; symbol ``x`` owns
    ``[cumulative[j][x - A_MIN], cumulative[j][x - A_MIN + 1])``.
    """

    sigma_levels: np.ndarray
    cumulative: tuple
    total_bits: int
    prob_floor: int
    thresholds: tuple
    magnitude_thresholds: tuple = None

    def __post_init__(self):
        if self.magnitude_thresholds is None:
            object.__setattr__(self, "magnitude_thresholds", _magnitude_thresholds(self.sigma_levels))

    @property
    def total(self):
        return 1 << self.total_bits

    @property
    def n_levels(self):
        return len(self.sigma_levels)

    def frequencies(self, level):
        return np.diff(np.array(self.cumulative[level], dtype=np.int64))

    def quantize(self, sigma):
        return quantize_sigma(sigma, self)

    def level_for_magnitude(self, m):
        return level_for_magnitude(m, self)

    def __eq__(self, other):
        if not isinstance(other, LaplaceTableSet):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def to_bytes(self):
        """Versioned binary dump; identical tables give identical bytes."""
        head = _BLOB_MAGIC + struct.pack(
            "<BBIH", _BLOB_VERSION, self.total_bits, self.prob_floor, self.n_levels
        )
        levels = np.asarray(self.sigma_levels, dtype="<f8").tobytes()
        cums = np.array(self.cumulative, dtype="<u8").tobytes()
        body = head + levels + cums
        return body + hashlib.sha256(body).digest()[:8]

    @classmethod
    def from_bytes(cls, blob):
        blob = bytes(blob)
        if blob[:4] != _BLOB_MAGIC or len(blob) < 20:
            raise ConfigError("not a table blob")
        body, digest = blob[:-8], blob[-8:]
        if hashlib.sha256(body).digest()[:8] != digest:
            raise ConfigError("table blob checksum mismatch")
        version, total_bits, floor, n = struct.unpack_from("<BBIH", body, 4)
        if version != _BLOB_VERSION:
            raise ConfigError(f"unsupported table blob version {version}")
        off = 12
        levels = np.frombuffer(body, "<f8", n, off).copy()
        off += 8 * n
        cums = np.frombuffer(body, "<u8", n * (ALPHABET_SIZE + 1), off).reshape(n, -1)
        return cls(
            sigma_levels=levels,
            cumulative=tuple(row.tolist() for row in cums.astype(np.int64)),
            total_bits=total_bits,
            prob_floor=floor,
            thresholds=_thresholds(levels),
        )


def _thresholds(levels):
    # Geometric midpoints: nearest level in log space.
    return tuple(np.sqrt(levels[:-1] * levels[1:]).tolist())


def quantize_sigma(sigma, tables: LaplaceTableSet):
    """Index of the grid level nearest to ``sigma`` in log space (clamped)."""
    return bisect_right(tables.thresholds, sigma)


def discrete_mean_abs(sigma):
    """``E|X|`` of the Laplace law with scale ``sigma`` discretised on unit bins.

    For the continuous law ``E|X| = sigma``; rounding to integers moves mass
    to 0, so the discrete mean is smaller, markedly so below ``sigma ~ 1``.
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    q = math.exp(-1.0 / sigma)
    return 2.0 * math.sinh(0.5 / sigma) * q / (1.0 - q) ** 2


def _magnitude_thresholds(levels):
    m = np.array([discrete_mean_abs(float(s)) for s in levels])
    return tuple(np.sqrt(m[:-1] * m[1:]).tolist())


def level_for_magnitude(m, tables: LaplaceTableSet):
    """Level whose discretised law has mean magnitude nearest to ``m`` (log space).

    The predictor estimates the mean absolute value of integer coefficients;
    this picks the table that matches that moment rather than treating the
    estimate as the continuous scale.
    """
    return bisect_right(tables.magnitude_thresholds, m)


def _cumulative_for(sigma, total, floor):
    """Monotone quantisation of the discretised CDF at the bin edges.

    Interior edges are rounded to ``total * F(edge)``; afterwards every symbol
    is forced to own at least ``floor`` units by pushing edges outward from
    the two tails.  The units needed by the floored tail symbols are thereby
    taken from the symbols where the tail meets the body of the distribution,
    leaving the central symbols at their rounded mass.
    """
    edges = np.arange(A_MIN, A_MAX + 2, dtype=np.float64) - 0.5
    inner = edges[1:-1]
    left = inner < 0
    c = np.empty(ALPHABET_SIZE + 1, dtype=np.float64)
    c[0], c[-1] = 0, total
    with np.errstate(under="ignore"):
        tail = np.floor(0.5 * total * np.exp(-np.abs(inner) / sigma) + 0.5)
    c[1:-1] = np.where(left, tail, total - tail)
    c = c.astype(np.int64)
    idx = np.arange(ALPHABET_SIZE + 1, dtype=np.int64)
    # Forward: c[j] >= j*floor, and increments of at least floor.
    c = np.maximum.accumulate(c - idx * floor) + idx * floor
    c[-1] = total
    # Backward: c[j] <= total - (N - j)*floor.
    rev = (ALPHABET_SIZE - idx) * floor
    c = total - (np.maximum.accumulate((total - c - rev)[::-1])[::-1] + rev)
    c[0], c[-1] = 0, total
    return c


@lru_cache(maxsize=8)
def build_tables(config: TableConfig = TableConfig()) -> LaplaceTableSet:
    """Build the cumulative tables for every level of ``config``.

    Raises :class:`ConfigError` if the total cannot give every symbol
    ``prob_floor`` units.
    """
    if config.prob_floor < 1:
        raise ConfigError("prob_floor must be at least 1")
    if not 8 <= config.total_bits <= 40:
        raise ConfigError("total_bits must lie in [8, 40]")
    total = 1 << config.total_bits
    if total < 2 * ALPHABET_SIZE * config.prob_floor:
        raise ConfigError(
            f"total 2**{config.total_bits} too small for {ALPHABET_SIZE} symbols "
            f"with floor {config.prob_floor}"
        )
    levels = config.levels()
    cums = []
    for sigma in levels:
        c = _cumulative_for(float(sigma), total, config.prob_floor)
        if c[-1] != total or np.any(np.diff(c) < config.prob_floor):
            raise ConfigError(f"could not normalise table for sigma={sigma}")
        cums.append(c.tolist())
    return LaplaceTableSet(
        sigma_levels=levels,
        cumulative=tuple(cums),
        total_bits=config.total_bits,
        prob_floor=config.prob_floor,
        thresholds=_thresholds(levels),
    )


def table_entropy(tables: LaplaceTableSet, level):
    """Entropy in bits of the coded distribution at ``level``."""
    p = tables.frequencies(level) / tables.total
    return float(-(p * np.log2(p)).sum())


def reference_tables() -> LaplaceTableSet:
    """The shipped reference dump of the default tables."""
    blob = (resources.files(__package__) / "data" / REFERENCE_BLOB).read_bytes()
    return LaplaceTableSet.from_bytes(lzma.decompress(blob))


def write_reference_blob(path):
    """Write the xz-compressed dump of the default tables to ``path``."""
    blob = lzma.compress(build_tables().to_bytes(), preset=9 | lzma.PRESET_EXTREME)
    with open(path, "wb") as f:
        f.write(blob)
    return len(blob)
