"""Evaluation drivers: per-image reports, QF sweeps, the K/projection ablation and timing."""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .codec import extract_signs, restored_image, sign_residual, signs_of
from .errors import ConfigurationError
from .imageio import Image, pad_to_blocks
from .metrics import EvalReport, aos, bps_bpp, psnr
from .neuralnet import ModelParams
from .rangecoder import rc_encode_bits
from .trainer import PatchSet, TrainConfig, train
from .transform import BASE_QUANT_TABLE, forward_quantize, reconstruct, scale_quant_table

__all__ = [
    "thread_count",
    "evaluate_image",
    "evaluate",
    "mean_reports",
    "AblationRow",
    "ablate_k",
    "BenchResult",
    "bench",
]

MEAN_LABEL = "MEAN"


def thread_count(requested: int | None = None) -> int:
    """Explicit request, else ``DSR_THREADS``, else the CPU count."""
    if requested is not None:
        n = requested
    elif os.environ.get("DSR_THREADS"):
        try:
            n = int(os.environ["DSR_THREADS"])
        except ValueError:
            raise ConfigurationError(f"DSR_THREADS must be an integer, got {os.environ['DSR_THREADS']!r}") from None
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigurationError(f"thread count must be positive, got {n}")
    return n


def evaluate_image(
    image: Image,
    qf: int,
    params: ModelParams | None,
    name: str = "",
    coded: bool = False,
) -> EvalReport:
    """Measure sign retrieval on one image.

    Without ``params`` the raw signs are the payload (AoS is then reported for
    an all-positive guess, and ``psnr_restored`` is nan). ``wall_time`` covers
    retrieval plus metric computation. ``coded=True`` also runs the range coder
    to report the real size of the sign section.
    """
    table = scale_quant_table(BASE_QUANT_TABLE, qf)
    padded = pad_to_blocks(image)
    grid = forward_quantize(padded, table)
    signs, _ = extract_signs(grid, table)
    n_pixels = image.width * image.height
    bps0, bpp0 = bps_bpp(signs, n_pixels)

    t0 = time.perf_counter()
    if params is None:
        guess = np.zeros_like(signs)
        quality = float("nan")
    else:
        restored = restored_image(grid, table, params)
        guess = signs_of(grid, restored)
        decoded = reconstruct(grid, table)
        crop = (slice(0, image.height), slice(0, image.width))
        quality = psnr(Image(restored[crop]), Image(decoded[crop]))
    residual = sign_residual(signs, guess)
    bps, bpp = bps_bpp(residual, n_pixels)
    accuracy = aos(signs, guess)
    wall = time.perf_counter() - t0

    size = -1
    if coded:
        size = len(rc_encode_bits(residual)) if params is not None else (len(signs) + 7) // 8
    return EvalReport(
        image=name,
        qf=int(qf),
        n_signs=int(signs.size),
        n_pixels=n_pixels,
        bps=bps,
        bpp=bpp,
        aos=accuracy,
        psnr_restored=quality,
        wall_time=wall,
        bps_baseline=bps0,
        bpp_baseline=bpp0,
        coded_bytes=size,
    )


def mean_reports(reports: Sequence[EvalReport], qf: int) -> EvalReport:
    """Per-QF summary row: plain means of every numeric field, counts summed."""
    if not reports:
        raise ConfigurationError("nothing to average")

    def avg(attr):
        return float(np.mean([getattr(r, attr) for r in reports]))

    coded = [r.coded_bytes for r in reports]
    return EvalReport(
        image=MEAN_LABEL,
        qf=int(qf),
        n_signs=sum(r.n_signs for r in reports),
        n_pixels=sum(r.n_pixels for r in reports),
        bps=avg("bps"),
        bpp=avg("bpp"),
        aos=avg("aos"),
        psnr_restored=avg("psnr_restored"),
        wall_time=avg("wall_time"),
        bps_baseline=avg("bps_baseline"),
        bpp_baseline=avg("bpp_baseline"),
        coded_bytes=sum(coded) if min(coded) >= 0 else -1,
    )


def evaluate(
    images: Sequence[tuple[str, Image]],
    params: ModelParams | None,
    qfs: Iterable[int],
    threads: int = 1,
    coded: bool = False,
) -> list[EvalReport]:
    """Per-image rows for every QF, each QF closed by its mean row.

    Images are processed concurrently when ``threads > 1``; rows always come
    back in input order, so the output does not depend on the thread count.
    """
    if not images:
        raise ConfigurationError("no images to evaluate")
    rows: list[EvalReport] = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for qf in qfs:
            batch = list(pool.map(lambda item: evaluate_image(item[1], qf, params, item[0], coded), images))
            rows.extend(batch)
            rows.append(mean_reports(batch, qf))
    return rows


@dataclass
class AblationRow:
    K: int
    pocs: bool
    aos: float
    psnr_restored: float
    bps: float
    train_seconds: float

    @staticmethod
    def csv_header() -> str:
        return "K,pocs,aos,psnr_restored,bps,train_seconds"

    def csv_row(self) -> str:
        return f"{self.K},{int(self.pocs)},{self.aos:.6f},{self.psnr_restored:.4f},{self.bps:.6f},{self.train_seconds:.1f}"


def ablate_k(
    train_images: Sequence[Image],
    test_images: Sequence[tuple[str, Image]],
    k_list: Iterable[int],
    pocs_options: Iterable[bool] = (True, False),
    base: TrainConfig | None = None,
    patches: int = 2000,
    patch_size: int = 64,
    qf: int = 50,
    threads: int = 1,
    on_row=None,
) -> list[AblationRow]:
    """Train one RDSR model per ``(K, pocs)`` pair and evaluate it at ``qf``.

    Every run sees the same patches, seed and schedule; only K and the
    projections change. Projections off means every stage is plain ``phi``.
    """
    base = base or TrainConfig(epochs=5)
    dataset = PatchSet(train_images, patch_size, patches, base.seed)
    out = []
    for pocs in pocs_options:
        for K in k_list:
            cfg = TrainConfig(
                qf_pocs=base.qf_pocs,
                lr=base.lr,
                batch=base.batch,
                epochs=base.epochs,
                K=K,
                variant="rdsr",
                seed=base.seed,
                pocs=pocs,
                dtype=base.dtype,
            )
            t0 = time.perf_counter()
            params = train(dataset, cfg)
            elapsed = time.perf_counter() - t0
            mean = evaluate(test_images, params, [qf], threads)[-1]
            row = AblationRow(K, pocs, mean.aos, mean.psnr_restored, mean.bps, elapsed)
            if on_row is not None:
                on_row(row)
            out.append(row)
    return out


@dataclass
class BenchResult:
    qf: int
    threads: int
    seconds_per_image: float
    checksum: str


def _checksum(reports: Sequence[EvalReport]) -> str:
    h = hashlib.sha256()
    for r in reports:
        h.update(f"{r.image},{r.n_signs},{r.bps:.12g},{r.aos:.12g}".encode())
    return h.hexdigest()[:16]


def bench(
    images: Sequence[tuple[str, Image]],
    params: ModelParams,
    qfs: Iterable[int],
    threads: int,
) -> list[BenchResult]:
    """Wall-clock seconds per image for retrieval + metrics, serial and with ``threads`` workers.

    The checksum over the per-image results must agree between the two runs.
    """
    out = []
    for qf in qfs:
        for n in sorted({1, threads}):
            t0 = time.perf_counter()
            rows = evaluate(images, params, [qf], n)[:-1]
            elapsed = time.perf_counter() - t0
            out.append(BenchResult(int(qf), n, elapsed / len(images), _checksum(rows)))
    return out

