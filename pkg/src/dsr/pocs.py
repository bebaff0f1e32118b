"""Projection onto the set of images whose DCT magnitudes are bounded by the decoded ones.

For an orthonormal block transform the nearest feasible image is obtained by
clamping every coefficient ``t`` to ``[-lam, lam]`` and transforming back.
The clamp is the identity minus soft-thresholding, so its sub-gradient is 1
strictly inside the interval and 0 outside.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .imageio import PaddedImage
from .transform import CoeffGrid, dct2, from_blocks, idct2, quant_steps, to_blocks

__all__ = ["magnitude_field", "project", "project_backward"]


def magnitude_field(grid: CoeffGrid, table: np.ndarray) -> np.ndarray:
    """Dequantised magnitudes ``|level| * step`` for every coefficient, DC included."""
    return np.abs(grid.levels).astype(np.float64) * quant_steps(table)


def _samples(z):
    if isinstance(z, PaddedImage):
        return z.samples
    z = np.asarray(z)
    return z if z.dtype == np.float32 else z.astype(np.float64, copy=False)


def _check(samples: np.ndarray, lam: np.ndarray):
    *lead, h, w = samples.shape
    expect = (h // 8, w // 8, 8, 8)
    if h % 8 or w % 8 or lam.shape[-4:] != expect:
        raise ShapeError(f"magnitude field {lam.shape} does not match image {samples.shape}")


def project(z, lam: np.ndarray):
    """Nearest point to ``z`` satisfying ``|dct2(block)| <= lam`` coefficient-wise.

    ``z`` may be a :class:`PaddedImage` or an array ``(..., H, W)`` whose trailing
    axes match ``lam`` of shape ``(..., H/8, W/8, 8, 8)``. Returns the projected
    image (same kind as ``z``) and a boolean tape over coefficients that is True
    where the coefficient passed through unclamped.
    """
    samples = _samples(z)
    lam = np.asarray(lam, dtype=samples.dtype)
    _check(samples, lam)
    t = dct2(to_blocks(samples))
    mask = np.abs(t) <= lam
    out = from_blocks(idct2(np.clip(t, -lam, lam)))
    if isinstance(z, PaddedImage):
        out = PaddedImage(out, original_width=z.original_width, original_height=z.original_height)
    return out, mask


def project_backward(grad_out: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Vector-Jacobian product of :func:`project` given its tape."""
    g = to_blocks(_samples(grad_out))
    if g.shape != mask.shape:
        raise ShapeError(f"gradient blocks {g.shape} do not match tape {mask.shape}")
    return from_blocks(idct2(np.where(mask, dct2(g), np.zeros((), g.dtype))))
