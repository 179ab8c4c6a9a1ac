"""Perceptual-hash discriminator: visually similar images map to one key.

The feature collector grays the image and box-filters it down to a 9x9
grid; the discriminator then compares adjacent cells within rows and within
columns to produce two 64-bit difference hashes, concatenated into a
128-bit key. Every arithmetic step is integer-exact so the key is identical
across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bitmap, DiscriminatorId, KeyMaterial, ValidationError

__all__ = [
    "FeatureGrid",
    "collect_features",
    "row_hash",
    "col_hash",
    "derive_key_phash",
]

GRID_SIZE = 9


@dataclass(frozen=True)
class FeatureGrid:
    """A 9x9 grid of 8-bit gray values, row-major."""

    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.cells) != GRID_SIZE * GRID_SIZE:
            raise ValidationError(f"feature grid needs 81 cells, got {len(self.cells)}")
        if any(c < 0 or c > 255 for c in self.cells):
            raise ValidationError("feature grid cells must lie in [0, 255]")

    def at(self, row: int, col: int) -> int:
        return self.cells[row * GRID_SIZE + col]

    def transpose(self) -> "FeatureGrid":
        return FeatureGrid(
            tuple(self.at(c, r) for r in range(GRID_SIZE) for c in range(GRID_SIZE))
        )


def collect_features(image: Bitmap) -> FeatureGrid:
    """Gray the image and area-average it down to a 9x9 feature grid.

    Grayscale uses integer luma (299*R + 587*G + 114*B) / 1000 rounded half
    up. Downsampling is an exact box filter: working in coordinates scaled
    by 9, every output cell covers an integer-area window, so the mean is a
    ratio of integers, truncated toward zero. A 9x9 gray input passes
    through untouched.
    """
    if image.width < GRID_SIZE or image.height < GRID_SIZE:
        raise ValidationError(
            f"image {image.width}x{image.height} is smaller than {GRID_SIZE}x{GRID_SIZE}"
        )
    px = np.frombuffer(image.pixels, dtype=np.uint8)
    if image.channels == 3:
        rgb = px.reshape(image.height, image.width, 3).astype(np.int64)
        gray = (299 * rgb[:, :, 0] + 587 * rgb[:, :, 1] + 114 * rgb[:, :, 2] + 500) // 1000
    else:
        gray = px.reshape(image.height, image.width).astype(np.int64)
    if image.width == GRID_SIZE and image.height == GRID_SIZE:
        return FeatureGrid(tuple(int(v) for v in gray.ravel()))
    h, w = image.height, image.width
    grid = (_overlap_weights(h) @ gray @ _overlap_weights(w).T) // (h * w)
    return FeatureGrid(tuple(int(v) for v in grid.ravel()))


def _overlap_weights(n: int) -> np.ndarray:
    """Integer overlap lengths between the 9 output bands and n input pixels.

    Pixel r spans [9r, 9r+9) and band i spans [i*n, (i+1)*n) once both axes
    are scaled by 9; each band's weights sum to exactly n.
    """
    i = np.arange(GRID_SIZE, dtype=np.int64)[:, None]
    r = np.arange(n, dtype=np.int64)[None, :]
    lo = np.maximum(i * n, 9 * r)
    hi = np.minimum((i + 1) * n, 9 * r + 9)
    return np.maximum(hi - lo, 0)


def row_hash(grid: FeatureGrid) -> bytes:
    """64-bit within-row difference hash, row-major, MSB-first.

    Bit (r, c) for r, c in 0..7 is 1 iff grid[r][c] < grid[r][c+1]; ties
    and decreases give 0. The 9th column only serves as the final
    comparison partner.
    """
    value = 0
    for r in range(8):
        for c in range(8):
            value = (value << 1) | (1 if grid.at(r, c) < grid.at(r, c + 1) else 0)
    return value.to_bytes(8, "big")


def col_hash(grid: FeatureGrid) -> bytes:
    """Transpose-symmetric analogue of :func:`row_hash` (within-column)."""
    return row_hash(grid.transpose())


def derive_key_phash(image: Bitmap) -> KeyMaterial:
    """128-bit key: row hash concatenated with column hash of the grid."""
    grid = collect_features(image)
    return KeyMaterial(
        row_hash(grid) + col_hash(grid), 128, DiscriminatorId.PERCEPTUAL_HASH
    )
