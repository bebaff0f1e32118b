import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsr.codec import sign_residual
from dsr.errors import ShapeError
from dsr.imageio import Image
from dsr.metrics import EvalReport, aos, binary_entropy, bps_bpp, psnr


def test_entropy_endpoints():
    assert binary_entropy(0, 10) == 0.0
    assert binary_entropy(10, 10) == 0.0
    assert binary_entropy(0, 0) == 0.0
    assert binary_entropy(5, 10) == 1.0


def test_entropy_at_011():
    assert binary_entropy(11, 100) == pytest.approx(0.4999, abs=1e-3)


def test_entropy_domain():
    with pytest.raises(ValueError):
        binary_entropy(11, 10)
    with pytest.raises(ValueError):
        binary_entropy(-1, 10)


@settings(max_examples=200)
@given(st.integers(1, 10**6), st.data())
def test_entropy_symmetric_and_bounded(total, data):
    ones = data.draw(st.integers(0, total))
    h = binary_entropy(ones, total)
    assert 0.0 <= h <= 1.0
    assert h == pytest.approx(binary_entropy(total - ones, total), abs=1e-12)


def test_bps_bpp_examples():
    assert bps_bpp(np.zeros(100, np.uint8), 400) == (0.0, 0.0)
    bps, bpp = bps_bpp(np.array([0, 1] * 50, np.uint8), 400)
    assert bps == 1.0 and bpp == 0.25
    assert bps_bpp(np.zeros(0, np.uint8), 64) == (0.0, 0.0)
    with pytest.raises(ValueError):
        bps_bpp(np.zeros(3), 0)


@settings(max_examples=100)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=500), st.integers(1, 10**5))
def test_bps_never_exceeds_one(bits, n_pixels):
    bps, bpp = bps_bpp(np.array(bits), n_pixels)
    assert 0 <= bps <= 1.0
    assert bpp == pytest.approx(bps * len(bits) / n_pixels)


def test_aos_examples():
    t = np.array([0, 1, 1, 0], np.uint8)
    assert aos(t, t) == 1.0
    assert aos(t, 1 - t) == 0.0
    assert aos(np.zeros(0), np.zeros(0)) == 1.0
    with pytest.raises(ShapeError):
        aos(t, t[:3])


@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=300))
def test_aos_complements_residual_density(pairs):
    t = np.array([a for a, _ in pairs], np.uint8)
    r = np.array([b for _, b in pairs], np.uint8)
    e = sign_residual(t, r)
    assert aos(t, r) + e.sum() / e.size == 1.0


def test_psnr_examples():
    a = Image(np.zeros((4, 4)))
    assert psnr(a, a) == math.inf
    b = Image(np.full((4, 4), 1 / 128))
    assert psnr(a, b) == pytest.approx(20 * math.log10(255), abs=1e-9)
    assert psnr(a, b) == psnr(b, a)
    with pytest.raises(ShapeError):
        psnr(a, Image(np.zeros((4, 5))))


def test_report_csv_and_invariants():
    r = EvalReport("x", 50, 10, 64, 0.5, 0.078125, 0.89, 30.0, 0.01, 0.99, 0.15, 7)
    assert r.csv_header().split(",")[:9] == [
        "image", "qf", "n_signs", "n_pixels", "bps", "bpp", "aos", "psnr_restored", "wall_time",
    ]
    assert r.csv_row().split(",")[0:3] == ["x", "50", "10"]
    assert len(r.csv_row().split(",")) == len(r.csv_header().split(","))
    assert r.bps_reduction == pytest.approx(1 - 0.5 / 0.99)
    with pytest.raises(ValueError):
        EvalReport("x", 50, 1, 1, 0.1, 0.1, 1.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        EvalReport("x", 50, 1, 1, -0.1, 0.1, 0.5, 0.0, 0.0)
