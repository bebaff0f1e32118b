"""Small natural-image corpus assembled from images bundled with common Python packages.

Nothing is downloaded: the images ship inside scikit-image, scikit-learn and
matplotlib wheels. They are converted to 8-bit luma and written as PGM so the
rest of the pipeline (and the command line) can treat them like any other
directory of images.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .imageio import Image, from_uint8, save_pgm

__all__ = ["TRAIN_NAMES", "TEST_NAMES", "load_named", "write_corpus"]

#: Held-out photographs (the stereo pair stays together so nothing leaks into training).
TEST_NAMES = (
    "camera",
    "astronaut",
    "coffee",
    "chelsea",
    "coins",
    "moon",
    "rocket",
    "page",
    "motorcycle_left",
    "motorcycle_right",
)

TRAIN_NAMES = (
    "brick",
    "gravel",
    "grass",
    "cell",
    "hubble_deep_field",
    "immunohistochemistry",
    "microaneurysms",
    "retina",
    "text",
    "china",
    "flower",
    "grace_hopper",
)


def _luma(rgb: np.ndarray) -> np.ndarray:
    rgb = np.asarray(rgb)
    if rgb.ndim == 2:
        return rgb.astype(np.uint8)
    rgb = rgb[..., :3].astype(np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.rint(y), 0, 255).astype(np.uint8)


def _fetch(name: str) -> np.ndarray:
    if name == "motorcycle_left":
        from skimage import data

        return data.stereo_motorcycle()[0]
    if name == "motorcycle_right":
        from skimage import data

        return data.stereo_motorcycle()[1]
    if name in ("china", "flower"):
        from sklearn.datasets import load_sample_image

        return load_sample_image(f"{name}.jpg")
    if name == "grace_hopper":
        import matplotlib.cbook
        from PIL import Image as PILImage

        with matplotlib.cbook.get_sample_data("grace_hopper.jpg") as fh:
            return np.asarray(PILImage.open(fh).convert("RGB"))
    from skimage import data

    img = getattr(data, name)()
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img / img.max() * 255), 0, 255).astype(np.uint8)
    return img


def load_named(name: str) -> Image:
    return Image(from_uint8(_luma(_fetch(name))))


def write_corpus(directory, names) -> list[Path]:
    """Write each named image as ``<directory>/<name>.pgm`` (skipping existing files)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name in names:
        path = directory / f"{name}.pgm"
        if not path.exists():
            save_pgm(load_named(name), path)
        paths.append(path)
    return paths
