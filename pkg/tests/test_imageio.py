import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dsr.errors import ConfigurationError, FormatError, TruncatedError, UnsupportedFormatError
from dsr.imageio import (
    Image,
    PaddedImage,
    crop_patches,
    from_uint8,
    load_pgm,
    pad_to_blocks,
    save_pgm,
    to_uint8,
)


def _write(path, payload: bytes):
    path.write_bytes(payload)
    return path


def test_load_single_mid_grey(tmp_path):
    im = load_pgm(_write(tmp_path / "a.pgm", b"P5\n1 1\n255\n\x80"))
    assert (im.width, im.height) == (1, 1)
    assert im.samples[0, 0] == 0.0


def test_load_black_is_minus_one(tmp_path):
    im = load_pgm(_write(tmp_path / "a.pgm", b"P5\n1 1\n255\n\x00"))
    assert im.samples[0, 0] == -1.0


def test_load_two_pixels(tmp_path):
    im = load_pgm(_write(tmp_path / "a.pgm", b"P5\n2 1\n255\n\x80\xc0"))
    np.testing.assert_array_equal(im.samples, [[0.0, 0.5]])


def test_header_comments_are_skipped(tmp_path):
    im = load_pgm(_write(tmp_path / "a.pgm", b"P5\n# made by hand\n2 # width\n1\n255\n\x80\xc0"))
    np.testing.assert_array_equal(im.samples, [[0.0, 0.5]])


def test_bad_magic(tmp_path):
    with pytest.raises(FormatError):
        load_pgm(_write(tmp_path / "a.pgm", b"P2\n1 1\n255\n128\n"))


def test_bad_header_token(tmp_path):
    with pytest.raises(FormatError):
        load_pgm(_write(tmp_path / "a.pgm", b"P5\nx 1\n255\n\x00"))


def test_maxval_other_than_255(tmp_path):
    with pytest.raises(UnsupportedFormatError):
        load_pgm(_write(tmp_path / "a.pgm", b"P5\n1 1\n65535\n\x00\x00"))


def test_truncated_payload(tmp_path):
    with pytest.raises(TruncatedError):
        load_pgm(_write(tmp_path / "a.pgm", b"P5\n4 4\n255\n\x00\x00"))


@pytest.mark.parametrize("sample,byte", [(0.0, 128), (0.999, 255), (-1.0, 0), (0.5, 192)])
def test_save_mapping(tmp_path, sample, byte):
    path = tmp_path / "b.pgm"
    save_pgm(Image(np.array([[sample]])), path)
    assert path.read_bytes()[-1] == byte


def test_save_unwritable(tmp_path):
    with pytest.raises(OSError):
        save_pgm(Image(np.zeros((2, 2))), tmp_path / "missing" / "x.pgm")


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.floats(-1.2, 1.2)))
def test_load_save_load_is_fixed_point(tmp_path_factory, samples):
    d = tmp_path_factory.mktemp("rt")
    save_pgm(Image(samples), d / "x.pgm")
    once = load_pgm(d / "x.pgm")
    np.testing.assert_array_equal(once.samples, from_uint8(to_uint8(samples)))
    save_pgm(once, d / "y.pgm")
    assert load_pgm(d / "y.pgm") == once


def test_image_is_immutable():
    im = Image(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        im.samples[0, 0] = 1.0
    assert (im.width, im.height) == (3, 2)


def test_image_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Image(np.zeros(4))
    with pytest.raises(ValueError):
        PaddedImage(np.zeros((8, 9)))


def test_pad_aligned_unchanged():
    im = Image(np.random.default_rng(0).uniform(-1, 1, (256, 256)))
    p = pad_to_blocks(im)
    assert (p.width, p.height) == (256, 256)
    assert p == PaddedImage(im.samples)


def test_pad_replicates_last_column():
    im = Image(np.arange(72, dtype=float).reshape(8, 9) / 100)
    p = pad_to_blocks(im)
    assert (p.width, p.height) == (16, 8)
    assert (p.original_width, p.original_height) == (9, 8)
    for c in range(9, 16):
        np.testing.assert_array_equal(p.samples[:, c], im.samples[:, 8])
    assert p.crop() == im


def test_pad_single_sample():
    p = pad_to_blocks(Image(np.array([[0.25]])))
    np.testing.assert_array_equal(p.samples, np.full((8, 8), 0.25))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 20)), elements=st.floats(-1, 1)))
def test_pad_keeps_original_extent(samples):
    p = pad_to_blocks(Image(samples))
    assert p.width % 8 == 0 and p.height % 8 == 0
    np.testing.assert_array_equal(p.samples[: samples.shape[0], : samples.shape[1]], samples)


def test_crop_single_placement():
    src = Image(np.random.default_rng(1).uniform(-1, 1, (256, 256)))
    (patch,) = crop_patches([src], 256, 1, seed=0)
    assert patch == src


def test_crop_is_deterministic():
    rng = np.random.default_rng(3)
    srcs = [Image(rng.uniform(-1, 1, (40, 64))), Image(rng.uniform(-1, 1, (80, 48)))]
    a = crop_patches(srcs, 16, 30, seed=7)
    b = crop_patches(srcs, 16, 30, seed=7)
    assert len(a) == 30
    assert all(x == y for x, y in zip(a, b))
    assert any(x != y for x, y in zip(a, crop_patches(srcs, 16, 30, seed=8)))


def test_crop_count_is_honoured():
    src = Image(np.zeros((260, 300)))
    assert len(crop_patches([src], 256, 500, seed=0)) == 500


def test_crop_skips_small_sources():
    big = Image(np.ones((32, 32)) * 0.5)
    small = Image(np.zeros((8, 8)))
    with pytest.warns(UserWarning, match="smaller"):
        patches = crop_patches([small, big], 16, 5, seed=0)
    assert all(np.all(p.samples == 0.5) for p in patches)


def test_crop_without_usable_sources():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ConfigurationError):
            crop_patches([Image(np.zeros((8, 8)))], 16, 1, seed=0)


def test_crop_rejects_unaligned_patch_size():
    with pytest.raises(ConfigurationError):
        crop_patches([Image(np.zeros((32, 32)))], 12, 1, seed=0)
