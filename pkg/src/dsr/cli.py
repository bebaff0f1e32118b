"""Command-line front end: ``dsr train|encode|decode|eval|ablate-k|bench|corpus``.

CSV columns written by ``eval`` (one row per image and QF, then a ``MEAN`` row
per QF)::

    image,qf,n_signs,n_pixels,bps,bpp,aos,psnr_restored,wall_time,
    bps_baseline,bpp_baseline,coded_bytes

``bps``/``bpp`` are entropy estimates of the sign residual; the ``*_baseline``
columns are the same quantities for raw signs; ``psnr_restored`` compares the
network's restored image with the decoded image. The thread count defaults to
``DSR_THREADS`` or the number of CPUs.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import time
from pathlib import Path

from . import codec
from .errors import DSRError
from .evaluate import AblationRow, ablate_k, bench, evaluate, thread_count
from .metrics import EvalReport
from .imageio import Image, list_images, load_image, save_pgm, to_uint8
from .neuralnet import VARIANTS, load_checkpoint
from .trainer import PatchSet, TrainConfig, train

log = logging.getLogger("dsr")

IMAGE_SUFFIXES = (".pgm", ".pnm", ".png", ".bmp", ".tif", ".tiff", ".jpg", ".jpeg")


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list is empty")
    return values


def _load_dir(directory) -> list[tuple[str, Image]]:
    paths = list_images(directory, IMAGE_SUFFIXES)
    if not paths:
        raise UsageError(f"no readable images in {directory}")
    return [(p.stem, load_image(p)) for p in paths]


def _check_qf(qf: int):
    if not 1 <= qf <= 100:
        raise UsageError(f"quality factor must be in 1..100, got {qf}")


def _pixel_hash(image: Image) -> str:
    return hashlib.sha256(to_uint8(image.samples).tobytes()).hexdigest()


def _write_reports(rows: list[EvalReport], path):
    lines = [EvalReport.csv_header()] + [r.csv_row() for r in rows]
    text = "\n".join(lines) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        qf_pocs=args.qf,
        lr=args.lr,
        batch=args.batch,
        epochs=args.epochs,
        K=args.k,
        variant=args.variant,
        seed=args.seed,
        pocs=not args.no_pocs,
        dtype=args.dtype,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args) -> int:
    if args.patches < 1:
        raise UsageError("--patches must be positive")
    config = _train_config(args)
    images = [im for _, im in _load_dir(args.data)]
    log.info(
        "config: variant=%s K=%d qf=%d patches=%d patch_size=%d batch=%d epochs=%d lr=%g seed=%d pocs=%s dtype=%s",
        config.variant, config.K, config.qf_pocs, args.patches, args.patch_size, config.batch,
        config.epochs, config.lr, config.seed, config.pocs, config.dtype,
    )
    dataset = PatchSet(images, args.patch_size, args.patches, config.seed)
    loss_csv = Path(args.loss_csv) if args.loss_csv else Path(str(args.out) + ".loss.csv")
    t0 = time.perf_counter()
    with open(loss_csv, "w", encoding="utf-8") as fh:
        fh.write("epoch,mean_loss\n")
        train(dataset, config, progress=fh, checkpoint=args.out)
    log.info("wrote %s and %s in %.1fs", args.out, loss_csv, time.perf_counter() - t0)
    return 0


def cmd_encode(args) -> int:
    _check_qf(args.qf)
    params = None
    if not args.no_retrieval:
        if args.ckpt is None:
            raise UsageError("--ckpt is required unless --no-retrieval is given")
        params = load_checkpoint(args.ckpt)
    image = load_image(args.input)
    stream = codec.encode(image, args.qf, params, retrieval=not args.no_retrieval)
    Path(args.out).write_bytes(stream)
    log.info("%s: %dx%d qf=%d -> %d bytes", args.input, image.width, image.height, args.qf, len(stream))
    return 0


def cmd_decode(args) -> int:
    params = load_checkpoint(args.ckpt) if args.ckpt else None
    image = codec.decode(Path(args.input).read_bytes(), params)
    save_pgm(image, args.out)
    print(f"sha256 {_pixel_hash(image)}")
    return 0


def cmd_eval(args) -> int:
    for qf in args.qf_list:
        _check_qf(qf)
    params = load_checkpoint(args.ckpt) if args.ckpt else None
    images = _load_dir(args.data)
    rows = evaluate(images, params, args.qf_list, thread_count(args.threads), coded=args.coded)
    _write_reports(rows, args.csv)
    for r in rows:
        if r.image == "MEAN":
            log.info("qf=%d aos=%.4f bps=%.4f (raw %.4f) bpp=%.4f", r.qf, r.aos, r.bps, r.bps_baseline, r.bpp)
    return 0


def cmd_ablate_k(args) -> int:
    _check_qf(args.qf)
    if args.no_pocs and args.pocs_only:
        raise UsageError("--no-pocs and --pocs-only are mutually exclusive")
    arms = (False,) if args.no_pocs else (True,) if args.pocs_only else (True, False)
    train_images = [im for _, im in _load_dir(args.data)]
    test_images = _load_dir(args.test) if args.test else None
    if test_images is None:
        log.warning("no --test directory; evaluating on the training images")
        test_images = _load_dir(args.data)
    base = TrainConfig(
        qf_pocs=args.qf, lr=args.lr, batch=args.batch, epochs=args.epochs, K=1, seed=args.seed, dtype=args.dtype
    )
    out = open(args.csv, "w", encoding="utf-8") if args.csv and args.csv != "-" else sys.stdout
    try:
        out.write(AblationRow.csv_header() + "\n")

        def emit(row: AblationRow):
            out.write(row.csv_row() + "\n")
            out.flush()
            log.info("K=%d pocs=%s aos=%.4f psnr=%.2f", row.K, row.pocs, row.aos, row.psnr_restored)

        ablate_k(
            train_images, test_images, args.k_list, arms, base,
            patches=args.patches, patch_size=args.patch_size, qf=args.qf,
            threads=thread_count(args.threads), on_row=emit,
        )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_bench(args) -> int:
    for qf in args.qf_list:
        _check_qf(qf)
    params = load_checkpoint(args.ckpt)
    images = _load_dir(args.data)
    threads = thread_count(args.threads)
    results = bench(images, params, args.qf_list, threads)
    print("qf,threads,seconds_per_image,checksum")
    for r in results:
        print(f"{r.qf},{r.threads},{r.seconds_per_image:.4f},{r.checksum}")
    for n in sorted({r.threads for r in results}):
        mean = sum(r.seconds_per_image for r in results if r.threads == n) / len(args.qf_list)
        print(f"mean seconds per image over QFs, {n} thread(s): {mean:.4f}")
    sums = {}
    for r in results:
        sums.setdefault(r.qf, set()).add(r.checksum)
    if any(len(v) != 1 for v in sums.values()):
        log.error("results differ between thread counts")
        return 1
    return 0


def cmd_corpus(args) -> int:
    from .corpus import TEST_NAMES, TRAIN_NAMES, write_corpus

    names = TRAIN_NAMES if args.split == "train" else TEST_NAMES
    for p in write_corpus(args.out, names):
        print(p)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_training_flags(p, defaults: TrainConfig, patches: int, patch_size: int, epochs: int | None = None):
    p.add_argument("--data", required=True, help="directory of training images (PGM)")
    p.add_argument("--qf", type=int, default=defaults.qf_pocs, help="quality factor of the training targets")
    p.add_argument("--patches", type=int, default=patches, help="number of random training patches")
    p.add_argument("--patch-size", type=int, default=patch_size, help="patch side in pixels (multiple of 8)")
    p.add_argument("--batch", type=int, default=defaults.batch)
    p.add_argument("--epochs", type=int, default=defaults.epochs if epochs is None else epochs)
    p.add_argument("--lr", type=float, default=defaults.lr, help="Adam step size")
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.add_argument("--dtype", choices=("float32", "float64"), default=defaults.dtype, help="training precision")


def build_parser() -> argparse.ArgumentParser:
    d = TrainConfig()
    parser = argparse.ArgumentParser(prog="dsr", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a sign-retrieval network")
    _add_training_flags(p, d, patches=50000, patch_size=256)
    p.add_argument("--out", required=True, help="checkpoint path (DSRW)")
    p.add_argument("--variant", choices=VARIANTS, default=d.variant)
    p.add_argument("--k", type=int, default=d.K, help="number of stages")
    p.add_argument("--no-pocs", action="store_true", help="drop the projections (ablation models only)")
    p.add_argument("--loss-csv", help="per-epoch loss CSV (default: <out>.loss.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="compress an image to a DSR1 stream")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt")
    p.add_argument("--qf", type=int, required=True)
    p.add_argument("--no-retrieval", action="store_true", help="store raw signs; the stream needs no model")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a DSR1 stream to PGM and print its pixel hash")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--ckpt")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="per-image and per-QF metrics as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", help="model; omit to report the raw-sign baseline only")
    p.add_argument("--qf-list", type=_int_list, default=list(range(5, 100, 5)))
    p.add_argument("--csv", default="-")
    p.add_argument("--threads", type=int)
    p.add_argument("--coded", action="store_true", help="also run the range coder for real sizes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate-k", help="AoS and PSNR against K, with and without projections")
    _add_training_flags(p, d, patches=2000, patch_size=64, epochs=5)
    p.add_argument("--test", help="held-out images (default: the training directory)")
    p.add_argument("--k-list", type=_int_list, default=[1, 2, 4])
    p.add_argument("--no-pocs", action="store_true", help="only run the arm without projections")
    p.add_argument("--pocs-only", action="store_true", help="only run the arm with projections")
    p.add_argument("--csv", default="-")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_ablate_k)

    p = sub.add_parser("bench", help="retrieval time per image, serial and threaded")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--qf-list", type=_int_list, default=[25, 50, 75])
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("corpus", help="write the bundled train or test images as PGM")
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.set_defaults(func=cmd_corpus)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, DSRError, ValueError, OSError) as exc:
        print(f"dsr {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
