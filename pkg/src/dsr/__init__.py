"""Deep sign retrieval for JPEG-style DCT coefficients.

The signs of quantised AC coefficients are estimated from their magnitudes by a
small projected convolutional network, and only the XOR residual between the
true and estimated signs is entropy coded.
"""

from .codec import decode, encode, retrieve_signs
from .errors import (
    ConfigurationError,
    DSRError,
    FormatError,
    NumericalError,
    ShapeError,
    TruncatedError,
    UnsupportedFormatError,
)
from .imageio import Image, PaddedImage, load_image, load_pgm, pad_to_blocks, save_pgm
from .metrics import EvalReport, aos, binary_entropy, bps_bpp, psnr
from .neuralnet import ModelParams, init_params, load_checkpoint, psi_forward, save_checkpoint
from .trainer import TrainConfig, train
from .transform import BASE_QUANT_TABLE, CoeffGrid, dct2, idct2, scale_quant_table

__version__ = "0.1.0"

__all__ = [
    "BASE_QUANT_TABLE",
    "CoeffGrid",
    "ConfigurationError",
    "DSRError",
    "EvalReport",
    "FormatError",
    "Image",
    "ModelParams",
    "NumericalError",
    "PaddedImage",
    "ShapeError",
    "TrainConfig",
    "TruncatedError",
    "UnsupportedFormatError",
    "aos",
    "binary_entropy",
    "bps_bpp",
    "dct2",
    "decode",
    "encode",
    "idct2",
    "init_params",
    "load_checkpoint",
    "load_image",
    "load_pgm",
    "pad_to_blocks",
    "psi_forward",
    "psnr",
    "retrieve_signs",
    "save_checkpoint",
    "save_pgm",
    "scale_quant_table",
    "train",
]
