"""Blockwise 8x8 orthonormal DCT-II, JPEG-style quantisation and block tiling.

All block functions broadcast over leading axes, so a whole image can be
transformed at once as an array of shape ``(..., 8, 8)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ShapeError
from .imageio import BLOCK, PaddedImage

__all__ = [
    "DCT_MATRIX",
    "BASE_QUANT_TABLE",
    "ZIGZAG",
    "CoeffGrid",
    "dct2",
    "idct2",
    "scale_quant_table",
    "quant_steps",
    "quantize",
    "dequantize",
    "to_blocks",
    "from_blocks",
    "split_blocks",
    "merge_blocks",
    "forward_quantize",
    "reconstruct",
]


def _dct_matrix(n: int = BLOCK) -> np.ndarray:
    k = np.arange(n)[:, None]
    u = np.arange(n)[None, :]
    m = np.cos((u + 0.5) * k * np.pi / n)
    m[0] *= np.sqrt(1.0 / n)
    m[1:] *= np.sqrt(2.0 / n)
    return m


#: Row ``k`` is the k-th orthonormal cosine basis vector; ``DCT_MATRIX @ DCT_MATRIX.T == I``.
DCT_MATRIX = _dct_matrix()
DCT_MATRIX.setflags(write=False)

#: Luminance table used at QF=50 (JPEG Annex K).
BASE_QUANT_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)
BASE_QUANT_TABLE.setflags(write=False)


def _zigzag(n: int = BLOCK) -> np.ndarray:
    order = sorted(
        ((r, c) for r in range(n) for c in range(n)),
        key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else rc[1]),
    )
    return np.array([r * n + c for r, c in order], dtype=np.int64)


#: Flat (row-major) block indices in JPEG zigzag scan order; ``ZIGZAG[0] == 0`` is DC.
ZIGZAG = _zigzag()
ZIGZAG.setflags(write=False)


_DCT_MATRIX32 = DCT_MATRIX.astype(np.float32)


def _real(a) -> tuple[np.ndarray, np.ndarray]:
    # float32 stays float32 (training fast path); everything else is promoted to float64
    a = np.asarray(a)
    if a.dtype == np.float32:
        return a, _DCT_MATRIX32
    return a.astype(np.float64, copy=False), DCT_MATRIX


def dct2(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II of one or more 8x8 blocks."""
    block, d = _real(block)
    return d @ block @ d.T


def idct2(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dct2` (the transpose of the orthonormal map)."""
    coeffs, d = _real(coeffs)
    return d.T @ coeffs @ d


def scale_quant_table(base: np.ndarray, qf: int) -> np.ndarray:
    """Scale a quantisation table by the IJG quality-factor rule."""
    if not 1 <= int(qf) <= 100:
        raise ConfigurationError(f"quality factor must be in 1..100, got {qf}")
    qf = int(qf)
    s = 5000 // qf if qf < 50 else 200 - 2 * qf
    table = (np.asarray(base, dtype=np.int64) * s + 50) // 100
    return np.clip(table, 1, 255)


def quant_steps(table: np.ndarray) -> np.ndarray:
    """Quantiser step sizes in the internal sample scale (table entries / 128)."""
    return np.asarray(table, dtype=np.float64) / 128.0


def quantize(coeffs: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Uniform quantisation with round-half-away-from-zero; returns int32 levels."""
    q = np.asarray(coeffs, dtype=np.float64) / quant_steps(table)
    levels = np.sign(q) * np.floor(np.abs(q) + 0.5)
    if levels.size and np.abs(levels).max() > 32767:
        raise OverflowError("quantised level exceeds the 16-bit range; input is out of domain")
    return levels.astype(np.int32)


def dequantize(levels: np.ndarray, table: np.ndarray) -> np.ndarray:
    return np.asarray(levels, dtype=np.float64) * quant_steps(table)


def to_blocks(samples: np.ndarray) -> np.ndarray:
    """Reshape ``(..., H, W)`` into ``(..., H/8, W/8, 8, 8)`` (row-major tiling)."""
    samples = np.asarray(samples)
    *lead, h, w = samples.shape
    if h % BLOCK or w % BLOCK:
        raise ShapeError(f"dimensions {w}x{h} are not multiples of {BLOCK}")
    b = samples.reshape(*lead, h // BLOCK, BLOCK, w // BLOCK, BLOCK)
    return np.swapaxes(b, -3, -2)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_blocks`."""
    blocks = np.asarray(blocks)
    *lead, by, bx, bh, bw = blocks.shape
    if (bh, bw) != (BLOCK, BLOCK):
        raise ShapeError(f"expected {BLOCK}x{BLOCK} blocks, got {bh}x{bw}")
    return np.swapaxes(blocks, -3, -2).reshape(*lead, by * BLOCK, bx * BLOCK)


def split_blocks(image: PaddedImage) -> np.ndarray:
    """Tile an image into an array of shape ``(blocks_y, blocks_x, 8, 8)``."""
    return to_blocks(image.samples).copy()


def merge_blocks(blocks: np.ndarray, dims: tuple[int, int], original=None) -> PaddedImage:
    """Reassemble blocks into a padded image of ``dims = (width, height)``."""
    width, height = dims
    blocks = np.asarray(blocks)
    if blocks.shape[:2] != (height // BLOCK, width // BLOCK) or width % BLOCK or height % BLOCK:
        raise ShapeError(f"{blocks.shape[:2]} blocks do not tile a {width}x{height} image")
    ow, oh = original if original is not None else (width, height)
    return PaddedImage(from_blocks(blocks), original_width=ow, original_height=oh)


@dataclass(frozen=True, eq=False)
class CoeffGrid:
    """Quantised DCT levels of a padded image, shape ``(blocks_y, blocks_x, 8, 8)``."""

    levels: np.ndarray

    def __post_init__(self):
        lv = np.asarray(self.levels)
        if lv.ndim != 4 or lv.shape[2:] != (BLOCK, BLOCK):
            raise ShapeError(f"levels must have shape (by, bx, 8, 8), got {lv.shape}")
        if lv.size and np.abs(lv).max() > 32767:
            raise OverflowError("level magnitude exceeds 16 bits")
        lv = lv.astype(np.int32, copy=True)
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)

    @property
    def blocks_x(self) -> int:
        return self.levels.shape[1]

    @property
    def blocks_y(self) -> int:
        return self.levels.shape[0]

    @property
    def width(self) -> int:
        return self.blocks_x * BLOCK

    @property
    def height(self) -> int:
        return self.blocks_y * BLOCK

    def __eq__(self, other):
        if not isinstance(other, CoeffGrid):
            return NotImplemented
        return np.array_equal(self.levels, other.levels)


def forward_quantize(image: PaddedImage, table: np.ndarray) -> CoeffGrid:
    """DCT every block of ``image`` and quantise with ``table``."""
    return CoeffGrid(quantize(dct2(to_blocks(image.samples)), table))


def reconstruct(grid: CoeffGrid, table: np.ndarray) -> np.ndarray:
    """Baseline decoder path: dequantise and inverse-DCT, returning padded samples."""
    return from_blocks(idct2(dequantize(grid.levels, table)))
