"""Grayscale image I/O, block padding and training-patch extraction.

Samples are held as float64 in the internal domain ``(p - 128) / 128``, so an
8-bit pixel ``p`` in ``[0, 255]`` maps into ``[-1, 1)``.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, TruncatedError, UnsupportedFormatError

__all__ = [
    "Image",
    "PaddedImage",
    "load_pgm",
    "save_pgm",
    "load_image",
    "to_uint8",
    "from_uint8",
    "pad_to_blocks",
    "crop_patches",
    "patch_placements",
    "list_images",
]

BLOCK = 8


@dataclass(frozen=True, eq=False)
class Image:
    """A grayscale image; ``samples`` has shape ``(height, width)``."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.size == 0:
            raise ValueError(f"expected a non-empty 2-D sample grid, got shape {s.shape}")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return self.samples.shape == other.samples.shape and np.array_equal(self.samples, other.samples)

    def __repr__(self):
        return f"{type(self).__name__}({self.width}x{self.height})"


@dataclass(frozen=True, eq=False)
class PaddedImage(Image):
    """An image whose dimensions are multiples of the block size."""

    original_width: int = 0
    original_height: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.width % BLOCK or self.height % BLOCK:
            raise ValueError(f"padded image must be a multiple of {BLOCK}, got {self.width}x{self.height}")
        if not self.original_width:
            object.__setattr__(self, "original_width", self.width)
        if not self.original_height:
            object.__setattr__(self, "original_height", self.height)

    def crop(self) -> Image:
        """Drop the replicated border and return the original extent."""
        return Image(self.samples[: self.original_height, : self.original_width])


def from_uint8(pixels: np.ndarray) -> np.ndarray:
    return (np.asarray(pixels, dtype=np.float64) - 128.0) / 128.0


def to_uint8(samples: np.ndarray) -> np.ndarray:
    """Map internal samples back to bytes: ``round(s*128 + 128)`` clamped to [0, 255]."""
    p = np.rint(np.asarray(samples, dtype=np.float64) * 128.0 + 128.0)
    return np.clip(p, 0, 255).astype(np.uint8)


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    for _ in range(count):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise FormatError("PGM header ended early")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens, pos


def load_pgm(path) -> Image:
    """Read a binary (P5) 8-bit PGM file."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {data[:2]!r})")
    try:
        (_, w, h, maxval), pos = _header_tokens(data, 4)
        width, height, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed PGM header") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedFormatError(f"{path}: maxval {maxval} (only 255 is supported)")
    # exactly one whitespace byte separates maxval from the raster
    pos += 1
    payload = data[pos : pos + width * height]
    if len(payload) < width * height:
        raise TruncatedError(f"{path}: expected {width * height} samples, found {len(payload)}")
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Image(from_uint8(pixels))


def save_pgm(image: Image, path) -> None:
    pixels = to_uint8(image.samples)
    header = b"P5\n%d %d\n255\n" % (image.width, image.height)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(pixels.tobytes())


def load_image(path) -> Image:
    """Load a PGM directly; other formats go through Pillow and are converted to luma."""
    path = Path(path)
    if path.suffix.lower() in (".pgm", ".pnm"):
        return load_pgm(path)
    from PIL import Image as PILImage

    with PILImage.open(path) as im:
        return Image(from_uint8(np.asarray(im.convert("L"))))


def list_images(directory, suffixes=(".pgm",)) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigurationError(f"{directory} is not a directory")
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in suffixes and p.is_file())


def pad_to_blocks(image: Image) -> PaddedImage:
    """Round both dimensions up to a multiple of 8 by replicating the last row/column."""
    h, w = image.height, image.width
    ph = -h % BLOCK
    pw = -w % BLOCK
    samples = np.pad(image.samples, ((0, ph), (0, pw)), mode="edge")
    return PaddedImage(samples, original_width=w, original_height=h)


def patch_placements(images, patch_size: int, count: int, seed: int) -> tuple[list[int], np.ndarray]:
    """Choose ``count`` patch windows without materialising them.

    Returns the indices of the usable sources and a ``(count, 3)`` integer array of
    ``(source, top, left)`` rows, where ``source`` indexes into the usable list.
    Each window picks a source uniformly and a uniform top-left corner inside it.
    """
    if patch_size <= 0 or patch_size % BLOCK:
        raise ConfigurationError(f"patch size must be a positive multiple of {BLOCK}, got {patch_size}")
    usable = []
    for i, im in enumerate(images):
        if im.width < patch_size or im.height < patch_size:
            warnings.warn(f"image {i} ({im.width}x{im.height}) is smaller than the {patch_size}px patch; skipped")
            continue
        usable.append(i)
    if not usable:
        raise ConfigurationError("no source image is large enough for the requested patch size")

    rng = np.random.default_rng(seed)
    windows = np.zeros((count, 3), dtype=np.int64)
    windows[:, 0] = rng.integers(0, len(usable), size=count)
    for row in windows:
        im = images[usable[row[0]]]
        row[1] = rng.integers(0, im.height - patch_size + 1)
        row[2] = rng.integers(0, im.width - patch_size + 1)
    return usable, windows


def crop_patches(images, patch_size: int, count: int, seed: int) -> list[Image]:
    """Draw ``count`` random square patches from ``images`` (deterministic in ``seed``)."""
    usable, windows = patch_placements(images, patch_size, count, seed)
    out = []
    for src, top, left in windows:
        im = images[usable[src]]
        out.append(Image(im.samples[top : top + patch_size, left : left + patch_size]))
    return out
