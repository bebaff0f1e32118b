"""Training of the sign-retrieval network: examples, squared-error objective and Adam."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError
from .imageio import Image, PaddedImage, patch_placements
from .neuralnet import ModelParams, Tape, init_params, psi_backward, psi_forward, save_checkpoint
from .pocs import magnitude_field
from .transform import BASE_QUANT_TABLE, dequantize, forward_quantize, from_blocks, idct2, scale_quant_table

__all__ = [
    "TrainExample",
    "TrainConfig",
    "AdamState",
    "PatchSet",
    "make_example",
    "initial_from_grid",
    "loss",
    "batch_loss",
    "adam_step",
    "train",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrainExample:
    target: np.ndarray  # (H, W) uncompressed patch
    x0: np.ndarray  # (H, W) DC-only reconstruction
    lam: np.ndarray  # (H/8, W/8, 8, 8) dequantised magnitudes


@dataclass
class TrainConfig:
    qf_pocs: int = 50
    lr: float = 2e-4
    batch: int = 10
    epochs: int = 50
    K: int = 20
    variant: str = "rdsr"
    seed: int = 0
    pocs: bool = True
    # forward/backward precision; parameter updates are always float64
    dtype: str = "float32"

    def __post_init__(self):
        self.variant = self.variant.lower()
        if not 1 <= self.qf_pocs <= 100:
            raise ConfigurationError(f"qf must be in 1..100, got {self.qf_pocs}")
        if self.lr <= 0 or self.batch < 1 or self.epochs < 0 or self.K < 1:
            raise ConfigurationError("lr, batch and K must be positive and epochs non-negative")
        if self.variant == "pdsr" and self.K != 1:
            raise ConfigurationError("pdsr is defined with K == 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"dtype must be float32 or float64, got {self.dtype!r}")


def initial_from_grid(levels: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Inverse DCT of the dequantised DC coefficients alone (AC set to zero)."""
    coeffs = np.zeros(levels.shape)
    coeffs[..., 0, 0] = dequantize(levels[..., 0, 0], table[0, 0])
    return from_blocks(idct2(coeffs))


def make_example(patch: Image, qf: int) -> TrainExample:
    padded = patch if isinstance(patch, PaddedImage) else PaddedImage(patch.samples)
    table = scale_quant_table(BASE_QUANT_TABLE, qf)
    grid = forward_quantize(padded, table)
    return TrainExample(padded.samples, initial_from_grid(grid.levels, table), magnitude_field(grid, table))


def _stack(examples: Sequence[TrainExample]):
    return (
        np.stack([e.target for e in examples]),
        np.stack([e.x0 for e in examples]),
        np.stack([e.lam for e in examples]),
    )


def _objective(params: ModelParams, target, x0, lam, dtype):
    tape = Tape()
    out = psi_forward(x0, params, lam, tape, dtype=dtype)
    resid = target - out
    per_item = np.sum(np.square(resid, dtype=np.float64), axis=(-2, -1))
    return per_item, resid, tape


def loss(params: ModelParams, example: TrainExample, dtype=np.float64):
    """Squared error ``sum (target - psi(x0))**2`` and its parameter gradients."""
    per_item, resid, tape = _objective(params, example.target[None], example.x0[None], example.lam[None], dtype)
    value = float(per_item[0])
    if not math.isfinite(value):
        raise NumericalError("loss is not finite")
    return value, psi_backward(-2.0 * resid, tape, params)


def batch_loss(params: ModelParams, examples: Sequence[TrainExample], dtype=np.float64):
    """Mean of the per-example losses and the matching mean gradient."""
    shapes = {e.target.shape for e in examples}
    if len(shapes) == 1:
        target, x0, lam = _stack(examples)
        per_item, resid, tape = _objective(params, target, x0, lam, dtype)
        value = float(per_item.mean())
        if not math.isfinite(value):
            raise NumericalError("batch loss is not finite")
        grads = psi_backward(-2.0 * resid / len(examples), tape, params)
        return value, grads
    total = 0.0
    acc = None
    for e in examples:
        v, g = loss(params, e, dtype)
        total += v
        acc = g if acc is None else [a + b for a, b in zip(acc, g)]
    return total / len(examples), [a / len(examples) for a in acc]


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros(a.shape) for a in arrays], [np.zeros(a.shape) for a in arrays])


def adam_step(params: ModelParams, grads, state: AdamState, lr: float) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; parameters are modified in place and returned."""
    arrays = params.arrays()
    if len(grads) != len(arrays) or len(state.m) != len(arrays):
        raise ConfigurationError("gradient/state layout does not match the parameters")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(arrays, grads, state.m, state.v):
        g = np.asarray(g, dtype=np.float64)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        step = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p[...] = (p.astype(np.float64) - step).astype(p.dtype)
    return params, state


class PatchSet(Sequence):
    """Lazily cropped training patches, so large configurations never sit in memory at once."""

    def __init__(self, images: Sequence[Image], patch_size: int, count: int, seed: int):
        self.images = list(images)
        self.patch_size = patch_size
        self.usable, self.windows = patch_placements(self.images, patch_size, count, seed)

    def __len__(self):
        return len(self.windows)

    def __getitem__(self, i):
        src, top, left = self.windows[i]
        im = self.images[self.usable[src]]
        s = self.patch_size
        return Image(im.samples[top : top + s, left : left + s])


def train(
    dataset: Sequence[Image],
    config: TrainConfig,
    progress=None,
    checkpoint=None,
    params: ModelParams | None = None,
    on_epoch=None,
) -> ModelParams:
    """Optimise the network on ``dataset`` and return the final parameters.

    Each epoch visits the patches in a fresh seeded permutation, in batches of
    ``config.batch``. The mean loss of every epoch is written to ``progress`` as
    an ``epoch,mean_loss`` CSV line; ``checkpoint`` (a path) is rewritten after
    every epoch and ``on_epoch(epoch, params, mean_loss)`` is called if given.
    """
    if len(dataset) == 0:
        raise ConfigurationError("training set is empty")
    if params is None:
        params = init_params(config.variant, config.K, config.seed, pocs=config.pocs)
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng([config.seed, 1])
    dtype = np.dtype(config.dtype).type
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(dataset))
        total = 0.0
        batches = 0
        for start in range(0, len(order), config.batch):
            items = [make_example(dataset[int(i)], config.qf_pocs) for i in order[start : start + config.batch]]
            value, grads = batch_loss(params, items, dtype)
            adam_step(params, grads, state, config.lr)
            total += value
            batches += 1
            log.debug("epoch %d batch %d loss %.6f", epoch, batches, value)
        mean = total / batches
        if progress is not None:
            progress.write(f"{epoch},{mean:.8g}\n")
            progress.flush()
        log.info("epoch %d/%d mean loss %.6f", epoch, config.epochs, mean)
        if checkpoint is not None:
            save_checkpoint(params, checkpoint)
        if on_epoch is not None:
            on_epoch(epoch, params, mean)
    if checkpoint is not None and config.epochs == 0:
        save_checkpoint(params, checkpoint)
    return params
