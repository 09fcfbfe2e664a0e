"""Lossless repacking of baseline JPEG files.

Quantized DCT coefficients are regrouped by zigzag position, the Laplace
scale of each coefficient is predicted from already coded neighbours, and
each bucket is entropy coded with either a range-coded multisymbol
arithmetic coder or an adaptive run-length Golomb-Rice coder.
"""

__version__ = "0.1.0"

from .container import compress, decompress, gain_percent, select_coder, sort_rlrg_bucket
from .errors import (
    ConfigError,
    CorruptContainer,
    CorruptStream,
    DomainError,
    EmptyInput,
    EncodingOverflow,
    InsufficientData,
    InternalMismatch,
    JrepackError,
    MissingPartnerMap,
    SymbolOutOfAlphabet,
    UnsupportedJpeg,
    VersionMismatch,
)
from .jpeg import parse_jpeg, serialize_jpeg
from .predictor import PredictorParams
from .tables import TableConfig, build_tables

__all__ = [
    "compress",
    "decompress",
    "gain_percent",
    "select_coder",
    "sort_rlrg_bucket",
    "parse_jpeg",
    "serialize_jpeg",
    "PredictorParams",
    "TableConfig",
    "build_tables",
    "ConfigError",
    "CorruptContainer",
    "CorruptStream",
    "DomainError",
    "EmptyInput",
    "EncodingOverflow",
    "InsufficientData",
    "InternalMismatch",
    "JrepackError",
    "MissingPartnerMap",
    "SymbolOutOfAlphabet",
    "UnsupportedJpeg",
    "VersionMismatch",
]
