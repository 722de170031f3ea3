"""Overlapping block decomposition with partition-of-unity weights.

The image domain is tiled by equally sized blocks whose starts advance by
``block_size - overlap``; the last block per axis is clamped so its far edge
lands on the image edge, which keeps every local system the same size. Each
block carries separable per-axis weights that ramp linearly from 0 at an
inner block boundary to 1 inside the overlap, so that the weights of all
covering blocks sum to exactly 1 at every pixel. Blending local corrections
with these weights is what makes the Schwarz iteration artifact-free across
block seams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BlockRect:
    """One block: top-left corner, extents, and per-side boundary kind.

    A side is an inner boundary iff it does not coincide with the image
    border; those sides get Robin conditions in the local solves and a
    zero-weight outermost pixel in the blending.
    """

    x0: int
    y0: int
    w: int
    h: int
    inner_left: bool
    inner_right: bool
    inner_top: bool
    inner_bottom: bool


@dataclass(frozen=True)
class BlockPartition:
    """Overlapping block layout over a width x height image."""

    width: int
    height: int
    block_size: int
    overlap: int
    xs: np.ndarray  # block start columns, ascending
    ys: np.ndarray  # block start rows, ascending
    block_w: int
    block_h: int

    @property
    def nx(self) -> int:
        return len(self.xs)

    @property
    def ny(self) -> int:
        return len(self.ys)

    @property
    def nblocks(self) -> int:
        return self.nx * self.ny

    def rect(self, i: int) -> BlockRect:
        """Block i in row-major block order (iy * nx + ix)."""
        iy, ix = divmod(i, self.nx)
        x0 = int(self.xs[ix])
        y0 = int(self.ys[iy])
        return BlockRect(
            x0=x0,
            y0=y0,
            w=self.block_w,
            h=self.block_h,
            inner_left=x0 > 0,
            inner_right=x0 + self.block_w < self.width,
            inner_top=y0 > 0,
            inner_bottom=y0 + self.block_h < self.height,
        )

    def rects(self) -> list[BlockRect]:
        return [self.rect(i) for i in range(self.nblocks)]


def _axis_starts(dim: int, block: int, stride: int) -> np.ndarray:
    if dim <= block:
        return np.zeros(1, dtype=np.int64)
    count = -(-(dim - block) // stride) + 1  # ceil division
    starts = stride * np.arange(count, dtype=np.int64)
    starts[-1] = dim - block  # clamp the last block to the image edge
    return starts


def build_partition(
    width: int, height: int, block_size: int = 32, overlap: int = 6
) -> BlockPartition:
    """Lay out overlapping blocks over the image.

    Starts per axis are 0, stride, 2*stride, ... with stride = block_size -
    overlap; the final start is clamped to dim - block_size. A dimension
    smaller than the block size gets a single full-extent block.
    """
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
    if overlap < 0 or block_size <= overlap:
        raise ValueError(f"need block_size > overlap >= 0, got {block_size}, {overlap}")
    stride = block_size - overlap
    return BlockPartition(
        width=width,
        height=height,
        block_size=block_size,
        overlap=overlap,
        xs=_axis_starts(width, block_size, stride),
        ys=_axis_starts(height, block_size, stride),
        block_w=min(block_size, width),
        block_h=min(block_size, height),
    )


@dataclass(frozen=True)
class BlockWeights:
    """Separable partition-of-unity weights, one 1D profile per block slot.

    wx[ix] and wy[iy] are the per-axis profiles of the block at column slot
    ix / row slot iy; the effective pixel weight inside a block is the outer
    product wy[iy] x wx[ix].
    """

    wx: np.ndarray  # (nx, block_w)
    wy: np.ndarray  # (ny, block_h)

    def block(self, partition: BlockPartition, i: int) -> np.ndarray:
        """Dense 2D weight array of block i."""
        iy, ix = divmod(i, partition.nx)
        return np.outer(self.wy[iy], self.wx[ix])


def _axis_weights(starts: np.ndarray, block: int, dim: int, overlap: int) -> np.ndarray:
    """Per-slot 1D weights along one axis, normalized to sum to 1 per pixel."""
    w = np.ones((len(starts), block))
    if overlap > 0:
        ramp = np.linspace(0.0, 1.0, overlap)
        for i, s in enumerate(starts):
            if s > 0:
                w[i, :overlap] *= ramp
            if s + block < dim:
                w[i, -overlap:] *= ramp[::-1]
    # Clamped edge blocks overlap their predecessors by more than `overlap`;
    # renormalizing per pixel restores the exact partition of unity there.
    total = np.zeros(dim)
    for i, s in enumerate(starts):
        total[s : s + block] += w[i]
    for i, s in enumerate(starts):
        w[i] /= total[s : s + block]
    return w


def build_weights(partition: BlockPartition) -> BlockWeights:
    """Partition-of-unity weights for a block layout.

    Along every inner-boundary side the weight ramps linearly over the
    overlap, 0 at the outermost pixel and 1 at the innermost (for overlap 6:
    0, 0.2, 0.4, 0.6, 0.8, 1.0); image-boundary sides stay at 1 up to the
    edge. Weights of covering blocks sum to 1 at every pixel.
    """
    return BlockWeights(
        wx=_axis_weights(partition.xs, partition.block_w, partition.width, partition.overlap),
        wy=_axis_weights(partition.ys, partition.block_h, partition.height, partition.overlap),
    )


def restrict_to_block(field: np.ndarray, rect: BlockRect) -> np.ndarray:
    """Copy the sub-rectangle of a global field covered by one block."""
    h, w = field.shape
    if rect.x0 < 0 or rect.y0 < 0 or rect.x0 + rect.w > w or rect.y0 + rect.h > h:
        raise ValueError(f"block {rect} exceeds field bounds {h}x{w}")
    return field[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w].copy()


def extend_add_weighted(
    field: np.ndarray, rect: BlockRect, weights: np.ndarray, local: np.ndarray
) -> None:
    """Accumulate weight * local into the global field, in place."""
    h, w = field.shape
    if rect.x0 < 0 or rect.y0 < 0 or rect.x0 + rect.w > w or rect.y0 + rect.h > h:
        raise ValueError(f"block {rect} exceeds field bounds {h}x{w}")
    if local.shape != (rect.h, rect.w) or weights.shape != (rect.h, rect.w):
        raise ValueError("local field / weights do not match the block extent")
    field[rect.y0 : rect.y0 + rect.h, rect.x0 : rect.x0 + rect.w] += weights * local
