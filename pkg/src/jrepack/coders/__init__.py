"""Entropy coders: range-coded multisymbol arithmetic coding and adaptive RLGR."""

from .rangecoder import (
    RangeDecoder,
    RangeEncoder,
    code_length_bits,
    msac_decode,
    msac_encode,
)
from .rlrg import deinterleave, interleave, rlrg_decode, rlrg_encode

__all__ = [
    "RangeDecoder",
    "RangeEncoder",
    "code_length_bits",
    "msac_decode",
    "msac_encode",
    "deinterleave",
    "interleave",
    "rlrg_decode",
    "rlrg_encode",
]
