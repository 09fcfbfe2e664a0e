"""Per-frequency buckets of DCT coefficients and the block neighbourhood.

Bucket ``k`` of a component collects the coefficient at zigzag position
``k`` of every block, in raster block order.  Bucket 0 holds DC values and
is delta coded before entropy coding.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .jpeg import BlockGrid, QuantizedImage

N_BUCKETS = 64


@dataclass(frozen=True, eq=False)
class BucketView:
    component_index: int
    bucket_index: int
    values: np.ndarray
    blocks_wide: int
    blocks_high: int

    def __post_init__(self):
        if len(self.values) != self.blocks_wide * self.blocks_high:
            raise ValueError("bucket length does not match the grid")

    def __len__(self):
        return len(self.values)

    def __eq__(self, other):
        if not isinstance(other, BucketView):
            return NotImplemented
        return (
            self.component_index == other.component_index
            and self.bucket_index == other.bucket_index
            and self.blocks_wide == other.blocks_wide
            and self.blocks_high == other.blocks_high
            and np.array_equal(self.values, other.values)
        )


def make_buckets(img: QuantizedImage):
    """Split every component into 64 buckets, components in frame order."""
    out = []
    for ci, grid in enumerate(img.components):
        zz = grid.zigzag()
        for k in range(N_BUCKETS):
            out.append(
                BucketView(ci, k, zz[:, k].astype(np.int64), grid.blocks_wide, grid.blocks_high)
            )
    return out


def grid_from_buckets(buckets) -> BlockGrid:
    """Reassemble one component from its 64 buckets (inverse of :func:`make_buckets`)."""
    buckets = sorted(buckets, key=lambda b: b.bucket_index)
    if [b.bucket_index for b in buckets] != list(range(N_BUCKETS)):
        raise ValueError("need exactly buckets 0..63 of one component")
    first = buckets[0]
    zz = np.stack([b.values for b in buckets], axis=1)
    return BlockGrid.from_zigzag(zz, first.blocks_wide, first.blocks_high)


def _values(x):
    return x.values if isinstance(x, BucketView) else np.asarray(x, dtype=np.int64)


def _like(x, values):
    return replace(x, values=values) if isinstance(x, BucketView) else values


def delta_dc(dc_bucket):
    """First forward differences over the whole component; the first value is kept.

    Accepts a :class:`BucketView` (bucket 0) or any integer sequence.
    """
    if isinstance(dc_bucket, BucketView) and dc_bucket.bucket_index != 0:
        raise ValueError("delta coding applies to the DC bucket only")
    v = _values(dc_bucket)
    out = v.copy()
    out[1:] = v[1:] - v[:-1]
    return _like(dc_bucket, out)


def inverse_delta_dc(delta_bucket):
    return _like(delta_bucket, np.cumsum(_values(delta_bucket), dtype=np.int64))


def neighbor_indices(block_index, blocks_wide):
    """Raster indices of the west, north and north-west blocks (``None`` off-grid)."""
    row, col = divmod(block_index, blocks_wide)
    left = block_index - 1 if col > 0 else None
    above = block_index - blocks_wide if row > 0 else None
    above_left = block_index - blocks_wide - 1 if row > 0 and col > 0 else None
    return left, above, above_left
