"""Rate and quality metrics: entropy-based BPS/BPP, accuracy of signs, PSNR."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ShapeError
from .imageio import Image, to_uint8

__all__ = ["EvalReport", "binary_entropy", "bps_bpp", "aos", "psnr"]


def binary_entropy(ones: int, total: int) -> float:
    """Zeroth-order entropy in bits/symbol of a binary source with ``ones`` of ``total`` set."""
    if total < 0 or ones < 0 or ones > total:
        raise ValueError(f"need 0 <= ones <= total, got ones={ones}, total={total}")
    if total == 0 or ones in (0, total):
        return 0.0
    p = ones / total
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def bps_bpp(residual, n_pixels: int) -> tuple[float, float]:
    """Bits per sign and bits per pixel implied by the residual's empirical entropy."""
    residual = np.asarray(residual)
    n = residual.size
    if n_pixels <= 0:
        raise ValueError("n_pixels must be positive")
    if n == 0:
        return 0.0, 0.0
    h = binary_entropy(int(np.count_nonzero(residual)), n)
    return h, h * n / n_pixels


def aos(true_signs, restored) -> float:
    """Fraction of restored sign bits equal to the true ones (1.0 for empty fields)."""
    t = np.asarray(true_signs)
    r = np.asarray(restored)
    if t.shape != r.shape:
        raise ShapeError(f"sign fields differ in length: {t.shape} vs {r.shape}")
    if t.size == 0:
        return 1.0
    return float(np.count_nonzero(t == r)) / t.size


def psnr(a: Image, b: Image) -> float:
    """PSNR in dB between two images after mapping both to 8-bit pixels; ``inf`` if identical."""
    if (a.width, a.height) != (b.width, b.height):
        raise ShapeError(f"image sizes differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    pa = to_uint8(a.samples).astype(np.float64)
    pb = to_uint8(b.samples).astype(np.float64)
    mse = float(np.mean((pa - pb) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


@dataclass
class EvalReport:
    """One image at one quality factor.

    ``bps``/``bpp`` describe the residual actually sent; the ``*_baseline``
    fields give the same quantities for raw signs, so reductions can be read
    off a single row. ``coded_bytes`` is the real range-coder output size.
    """

    image: str
    qf: int
    n_signs: int
    n_pixels: int
    bps: float
    bpp: float
    aos: float
    psnr_restored: float
    wall_time: float
    bps_baseline: float = 1.0
    bpp_baseline: float = 0.0
    coded_bytes: int = -1

    def __post_init__(self):
        if not 0.0 <= self.aos <= 1.0:
            raise ValueError(f"aos must lie in [0, 1], got {self.aos}")
        if self.bps < 0 or self.bpp < 0:
            raise ValueError("bps and bpp must be non-negative")

    @property
    def bps_reduction(self) -> float:
        return 1.0 - self.bps / self.bps_baseline if self.bps_baseline > 0 else 0.0

    @property
    def bpp_reduction(self) -> float:
        return 1.0 - self.bpp / self.bpp_baseline if self.bpp_baseline > 0 else 0.0

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    def csv_row(self) -> str:
        out = []
        for v in asdict(self).values():
            out.append(f"{v:.6g}" if isinstance(v, float) else str(v))
        return ",".join(out)
