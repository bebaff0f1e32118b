"""Encoder and decoder that transmit only the XOR residual between true and retrieved signs.

Container layout (little-endian)::

    "DSR1" | version u8 = 1 | variant u8 | K u8 | qf u8 | width u32 | height u32
    | len u32 | DC section
    | len u32 | AC magnitude section
    | len u32 | residual section (range coded) or raw sign bits (variant 255)

The variant byte is 0/1/2 for pdsr/rdsr/fdsr and 255 when signs are sent raw.
DC levels are DPCM coded in block raster order with signed Exp-Golomb codes.
AC magnitudes are coded per block in zigzag order as ``ue(run + 1) ue(level - 1)``
pairs closed by ``ue(0)``. Sign bits cover non-zero AC levels only, in block
raster order and zigzag order within each block; 1 means negative.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .bitio import BitReader, BitWriter
from .errors import ConfigurationError, FormatError, ShapeError
from .imageio import Image, PaddedImage, pad_to_blocks
from .neuralnet import VARIANTS, ModelParams, psi_forward
from .pocs import magnitude_field
from .rangecoder import rc_decode_bits, rc_encode_bits
from .trainer import initial_from_grid
from .transform import (
    BASE_QUANT_TABLE,
    ZIGZAG,
    CoeffGrid,
    dct2,
    forward_quantize,
    reconstruct,
    scale_quant_table,
    to_blocks,
)

__all__ = [
    "MAGIC",
    "NO_RETRIEVAL",
    "Header",
    "sign_mask",
    "extract_signs",
    "initial_image",
    "restored_image",
    "retrieve_signs",
    "signs_of",
    "sign_residual",
    "apply_residual",
    "encode_dc",
    "decode_dc",
    "encode_ac_magnitudes",
    "decode_ac_magnitudes",
    "encode",
    "decode",
    "render",
    "decode_levels",
    "parse_header",
    "baseline_reconstruction",
]

MAGIC = b"DSR1"
VERSION = 1
NO_RETRIEVAL = 255
_HEADER = struct.Struct("<4sBBBBII")


def _zigzag_blocks(levels: np.ndarray) -> np.ndarray:
    """``(by, bx, 8, 8)`` -> ``(by * bx, 64)`` in zigzag order."""
    return np.asarray(levels).reshape(-1, 64)[:, ZIGZAG]


def sign_mask(grid: CoeffGrid) -> np.ndarray:
    """Boolean ``(blocks, 63)`` mask of coded sign positions (non-zero AC, zigzag order)."""
    return _zigzag_blocks(grid.levels)[:, 1:] != 0


def extract_signs(grid: CoeffGrid, table: np.ndarray):
    """Split a coefficient grid into its sign bits and its dequantised magnitudes.

    Returns ``(signs, lam)``: ``signs`` is a uint8 vector (1 = negative) over
    the non-zero AC levels in canonical order, and ``lam`` holds
    ``|level| * step`` for every coefficient including DC.
    """
    zz = _zigzag_blocks(grid.levels)[:, 1:]
    signs = (zz[zz != 0] < 0).astype(np.uint8)
    return signs, magnitude_field(grid, table)


def initial_image(grid: CoeffGrid, table: np.ndarray, original=None) -> PaddedImage:
    """Blockwise-constant image from the dequantised DC levels alone."""
    samples = initial_from_grid(grid.levels, table)
    ow, oh = original if original is not None else (grid.width, grid.height)
    return PaddedImage(samples, original_width=ow, original_height=oh)


def restored_image(grid: CoeffGrid, table: np.ndarray, params: ModelParams) -> np.ndarray:
    """Image recovered by the network and projections from magnitudes and DC only."""
    x0 = initial_from_grid(_unsigned_ac(grid.levels), table)
    return psi_forward(x0, params, magnitude_field(grid, table))


def _unsigned_ac(levels: np.ndarray) -> np.ndarray:
    # the retrieval input must not depend on AC signs; only DC is used by x0, so this is a guard
    out = np.abs(levels)
    out[..., 0, 0] = levels[..., 0, 0]
    return out


def retrieve_signs(grid: CoeffGrid, table: np.ndarray, params: ModelParams) -> np.ndarray:
    """Estimate the AC sign bits from magnitudes (and decoded DC) only.

    Deterministic: encoder and decoder obtain identical bits from identical
    inputs. A restored coefficient that is exactly zero counts as positive.
    """
    if not sign_mask(grid).any():
        return np.zeros(0, dtype=np.uint8)
    return signs_of(grid, restored_image(grid, table, params))


def signs_of(grid: CoeffGrid, samples: np.ndarray) -> np.ndarray:
    """Sign bits of ``samples``' DCT at the coded positions of ``grid``."""
    coeffs = _zigzag_blocks(dct2(to_blocks(samples)))[:, 1:]
    return (coeffs[sign_mask(grid)] < 0).astype(np.uint8)


def sign_residual(true_signs, restored) -> np.ndarray:
    true_signs = np.asarray(true_signs, dtype=np.uint8)
    restored = np.asarray(restored, dtype=np.uint8)
    if true_signs.shape != restored.shape:
        raise ShapeError(f"sign fields differ in length: {true_signs.shape} vs {restored.shape}")
    return true_signs ^ restored


def apply_residual(restored, residual) -> np.ndarray:
    return sign_residual(restored, residual)


# ---------------------------------------------------------------------------
# magnitude and DC sections
# ---------------------------------------------------------------------------


def encode_dc(grid: CoeffGrid) -> bytes:
    w = BitWriter()
    prev = 0
    for dc in grid.levels[..., 0, 0].ravel().tolist():
        w.write_se(dc - prev)
        prev = dc
    return w.getvalue()


def decode_dc(data: bytes, n_blocks: int) -> np.ndarray:
    r = BitReader(data)
    out = np.empty(n_blocks, dtype=np.int32)
    prev = 0
    for i in range(n_blocks):
        prev += r.read_se()
        out[i] = prev
    return out


def encode_ac_magnitudes(grid: CoeffGrid) -> bytes:
    w = BitWriter()
    for row in np.abs(_zigzag_blocks(grid.levels)[:, 1:]).tolist():
        run = 0
        for m in row:
            if m:
                w.write_ue(run + 1)
                w.write_ue(m - 1)
                run = 0
            else:
                run += 1
        w.write_ue(0)
    return w.getvalue()


def decode_ac_magnitudes(data: bytes, n_blocks: int) -> np.ndarray:
    """Returns ``(n_blocks, 63)`` magnitudes in zigzag order (AC only)."""
    r = BitReader(data)
    out = np.zeros((n_blocks, 63), dtype=np.int32)
    for b in range(n_blocks):
        pos = 0
        while True:
            code = r.read_ue()
            if code == 0:
                break
            pos += code - 1
            if pos >= 63:
                raise FormatError(f"AC run overflows block {b}")
            out[b, pos] = r.read_ue() + 1
            pos += 1
    return out


# ---------------------------------------------------------------------------
# container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Header:
    variant: int
    K: int
    qf: int
    width: int
    height: int

    @property
    def blocks(self) -> tuple[int, int]:
        return (self.height + 7) // 8, (self.width + 7) // 8

    @property
    def retrieval(self) -> bool:
        return self.variant != NO_RETRIEVAL


def _variant_code(params: ModelParams) -> int:
    if not params.pocs:
        raise ConfigurationError("models trained without projections are for ablation only")
    return VARIANTS.index(params.variant)


def _check_params(header: Header, params: ModelParams | None):
    if not header.retrieval:
        return
    if params is None:
        raise ConfigurationError("this stream uses sign retrieval; a checkpoint is required to decode it")
    if _variant_code(params) != header.variant or params.K != header.K:
        raise ConfigurationError(
            f"checkpoint is {params.variant} K={params.K}, stream was encoded with "
            f"{VARIANTS[header.variant] if header.variant < len(VARIANTS) else header.variant} K={header.K}"
        )


def baseline_reconstruction(image: Image, qf: int) -> Image:
    """Plain JPEG-path decode (quantise, dequantise, inverse DCT, crop), for comparisons."""
    padded = pad_to_blocks(image)
    table = scale_quant_table(BASE_QUANT_TABLE, qf)
    samples = reconstruct(forward_quantize(padded, table), table)
    return Image(samples[: image.height, : image.width])


def encode(image: Image, qf: int, params: ModelParams | None = None, retrieval: bool = True) -> bytes:
    """Compress ``image`` at quality ``qf``.

    With ``retrieval=False`` (or no ``params``) the raw sign bits are stored and
    the variant byte is 255, so the stream decodes without a model.
    """
    table = scale_quant_table(BASE_QUANT_TABLE, qf)
    padded = pad_to_blocks(image)
    grid = forward_quantize(padded, table)
    signs, _ = extract_signs(grid, table)
    if retrieval and params is not None:
        variant, K = _variant_code(params), params.K
        residual = sign_residual(signs, retrieve_signs(grid, table, params))
        sign_section = rc_encode_bits(residual)
    else:
        variant, K = NO_RETRIEVAL, 0
        sign_section = np.packbits(signs).tobytes()
    head = _HEADER.pack(MAGIC, VERSION, variant, K, int(qf), image.width, image.height)
    parts = [head]
    for payload in (encode_dc(grid), encode_ac_magnitudes(grid), sign_section):
        parts.append(struct.pack("<I", len(payload)))
        parts.append(payload)
    return b"".join(parts)


def parse_header(stream: bytes) -> tuple[Header, list[bytes]]:
    if len(stream) < _HEADER.size:
        raise FormatError("stream is shorter than the DSR1 header")
    magic, version, variant, K, qf, width, height = _HEADER.unpack_from(stream)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported stream version {version}")
    if not 1 <= qf <= 100 or width < 1 or height < 1:
        raise FormatError("header fields out of range")
    if variant != NO_RETRIEVAL and (variant >= len(VARIANTS) or K < 1):
        raise FormatError(f"bad variant {variant} / K {K}")
    pos = _HEADER.size
    sections = []
    for _ in range(3):
        if pos + 4 > len(stream):
            raise FormatError("stream truncated before a section length")
        (n,) = struct.unpack_from("<I", stream, pos)
        pos += 4
        if pos + n > len(stream):
            raise FormatError("section length exceeds the stream")
        sections.append(stream[pos : pos + n])
        pos += n
    if pos != len(stream):
        raise FormatError(f"{len(stream) - pos} trailing bytes after the last section")
    return Header(variant, K, qf, width, height), sections


def decode_levels(stream: bytes, params: ModelParams | None = None) -> tuple[Header, CoeffGrid]:
    """Parse a stream back into its quantised levels (signs restored losslessly)."""
    header, (dc_sec, ac_sec, sign_sec) = parse_header(stream)
    _check_params(header, params)
    by, bx = header.blocks
    n = by * bx
    mags = decode_ac_magnitudes(ac_sec, n)
    zz = np.zeros((n, 64), dtype=np.int32)
    zz[:, 0] = decode_dc(dc_sec, n)
    zz[:, 1:] = mags
    levels = np.zeros((n, 64), dtype=np.int32)
    levels[:, ZIGZAG] = zz
    unsigned = CoeffGrid(levels.reshape(by, bx, 8, 8))
    table = scale_quant_table(BASE_QUANT_TABLE, header.qf)
    count = int(np.count_nonzero(mags))
    if header.retrieval:
        residual = rc_decode_bits(sign_sec, count)
        signs = apply_residual(retrieve_signs(unsigned, table, params), residual)
    else:
        if len(sign_sec) != (count + 7) // 8:
            raise FormatError("raw sign section has the wrong length")
        signs = np.unpackbits(np.frombuffer(sign_sec, dtype=np.uint8), count=count)
    ac = zz[:, 1:]
    nz = ac != 0
    ac[nz] = np.where(signs.astype(bool), -ac[nz], ac[nz])
    levels[:, ZIGZAG] = zz
    return header, CoeffGrid(levels.reshape(by, bx, 8, 8))


def render(header: Header, grid: CoeffGrid) -> Image:
    """Dequantise, inverse-transform and crop decoded levels to the stored size."""
    table = scale_quant_table(BASE_QUANT_TABLE, header.qf)
    samples = reconstruct(grid, table)
    return Image(samples[: header.height, : header.width])


def decode(stream: bytes, params: ModelParams | None = None) -> Image:
    return render(*decode_levels(stream, params))
