import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dsr.errors import ConfigurationError, ShapeError
from dsr.imageio import PaddedImage
from dsr.transform import (
    BASE_QUANT_TABLE,
    DCT_MATRIX,
    ZIGZAG,
    CoeffGrid,
    dct2,
    dequantize,
    forward_quantize,
    idct2,
    merge_blocks,
    quant_steps,
    quantize,
    reconstruct,
    scale_quant_table,
    split_blocks,
)

blocks = arrays(np.float64, (8, 8), elements=st.floats(-1, 1))


def _reference_dct(x):
    # direct double sum, independent of the matrix form
    out = np.zeros((8, 8))
    for wu in range(8):
        for wv in range(8):
            au = np.sqrt((1 if wu == 0 else 2) / 8)
            av = np.sqrt((1 if wv == 0 else 2) / 8)
            s = 0.0
            for u in range(8):
                for v in range(8):
                    s += x[u, v] * np.cos((u + 0.5) * wu * np.pi / 8) * np.cos((v + 0.5) * wv * np.pi / 8)
            out[wu, wv] = au * av * s
    return out


def test_matches_direct_sum(rng):
    x = rng.uniform(-1, 1, (8, 8))
    np.testing.assert_allclose(dct2(x), _reference_dct(x), atol=1e-13)


def test_constant_block():
    c = dct2(np.full((8, 8), 0.3))
    assert c[0, 0] == pytest.approx(8 * 0.3, abs=1e-14)
    c[0, 0] = 0
    assert np.abs(c).max() < 1e-14


def test_zero_block():
    assert not dct2(np.zeros((8, 8))).any()
    assert not idct2(np.zeros((8, 8))).any()


def test_impulse_has_unit_norm():
    x = np.zeros((8, 8))
    x[0, 0] = 1
    assert np.linalg.norm(dct2(x)) == pytest.approx(1.0, abs=1e-14)


def test_inverse_of_constant_case():
    c = np.zeros((8, 8))
    c[0, 0] = 8
    np.testing.assert_allclose(idct2(c), np.ones((8, 8)), atol=1e-14)


def test_round_trip_random(rng):
    x = rng.uniform(-1, 1, (50, 8, 8))
    assert np.abs(idct2(dct2(x)) - x).max() < 1e-12


def test_basis_is_orthonormal():
    np.testing.assert_allclose(DCT_MATRIX @ DCT_MATRIX.T, np.eye(8), atol=1e-14)


def test_float32_stays_float32():
    x = np.ones((8, 8), dtype=np.float32)
    assert dct2(x).dtype == np.float32
    assert dct2(x.astype(np.int64)).dtype == np.float64


@settings(max_examples=100, deadline=None)
@given(blocks)
def test_parseval(x):
    c = dct2(x)
    e = np.sum(x**2)
    assert abs(np.sum(c**2) - e) <= 1e-9 * max(e, 1e-300) + 1e-300


@settings(max_examples=100, deadline=None)
@given(blocks)
def test_round_trip_property(x):
    assert np.abs(idct2(dct2(x)) - x).max() < 1e-12


def test_qf50_is_base_table():
    np.testing.assert_array_equal(scale_quant_table(BASE_QUANT_TABLE, 50), BASE_QUANT_TABLE)


def test_qf100_is_all_ones():
    np.testing.assert_array_equal(scale_quant_table(BASE_QUANT_TABLE, 100), np.ones((8, 8)))


def test_qf25_doubles():
    assert scale_quant_table(BASE_QUANT_TABLE, 25)[0, 0] == 32


@pytest.mark.parametrize("qf", [0, 101, -5])
def test_qf_out_of_range(qf):
    with pytest.raises(ConfigurationError):
        scale_quant_table(BASE_QUANT_TABLE, qf)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 100))
def test_scaled_entries_in_range(qf):
    t = scale_quant_table(BASE_QUANT_TABLE, qf)
    assert t.min() >= 1 and t.max() <= 255


def test_quantize_examples():
    table = np.full((8, 8), 16)
    c = np.zeros((8, 8))
    c[0, 1] = 37 / 128
    c[0, 2] = -37 / 128
    lv = quantize(c, table)
    assert lv[0, 1] == 2 and lv[0, 2] == -2
    assert lv.dtype == np.int32
    assert not lv[1:].any()


def test_quantize_rounds_half_away_from_zero():
    table = np.full((8, 8), 16)
    c = np.zeros((8, 8))
    c[0, 0] = 2.5 * 16 / 128
    c[0, 1] = -2.5 * 16 / 128
    lv = quantize(c, table)
    assert (lv[0, 0], lv[0, 1]) == (3, -3)


def test_quantize_overflow():
    with pytest.raises(OverflowError):
        quantize(np.full((8, 8), 1e4), np.ones((8, 8)))


def test_dequantize_examples():
    table = np.full((8, 8), 16)
    lv = np.zeros((8, 8), dtype=int)
    lv[3, 3] = 2
    out = dequantize(lv, table)
    assert out[3, 3] == 32 / 128
    assert out[0, 0] == 0


@settings(max_examples=60, deadline=None)
@given(arrays(np.int32, (8, 8), elements=st.integers(-500, 500)), st.integers(1, 100))
def test_dequantized_levels_are_fixed_points(levels, qf):
    table = scale_quant_table(BASE_QUANT_TABLE, qf)
    np.testing.assert_array_equal(quantize(dequantize(levels, table), table), levels)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (8, 8), elements=st.floats(-8, 8)), st.integers(1, 100))
def test_quantiser_error_bound(coeffs, qf):
    table = scale_quant_table(BASE_QUANT_TABLE, qf)
    err = np.abs(coeffs - dequantize(quantize(coeffs, table), table))
    assert np.all(err <= quant_steps(table) / 2 + 1e-12)


def test_split_tiling():
    x = np.arange(128, dtype=float).reshape(8, 16) / 200
    b = split_blocks(PaddedImage(x))
    assert b.shape == (1, 2, 8, 8)
    np.testing.assert_array_equal(b[0, 1], x[:, 8:16])


def test_split_count():
    assert split_blocks(PaddedImage(np.zeros((256, 256)))).shape[:2] == (32, 32)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 2**31))
def test_merge_inverts_split(by, bx, seed):
    x = np.random.default_rng(seed).uniform(-1, 1, (8 * by, 8 * bx))
    im = PaddedImage(x)
    assert merge_blocks(split_blocks(im), (im.width, im.height)) == im


def test_merge_dimension_mismatch():
    with pytest.raises(ShapeError):
        merge_blocks(np.zeros((2, 2, 8, 8)), (24, 16))


def test_zigzag_prefix():
    assert list(ZIGZAG[:10]) == [0, 1, 8, 16, 9, 2, 3, 10, 17, 24]
    assert sorted(ZIGZAG) == list(range(64))


def test_coeff_grid_invariants():
    with pytest.raises(ShapeError):
        CoeffGrid(np.zeros((2, 8, 8)))
    with pytest.raises(OverflowError):
        CoeffGrid(np.full((1, 1, 8, 8), 40000))
    g = CoeffGrid(np.zeros((2, 3, 8, 8)))
    assert (g.blocks_x, g.blocks_y, g.width, g.height) == (3, 2, 24, 16)


def test_reconstruct_is_dequantize_then_inverse(rng):
    im = PaddedImage(rng.uniform(-1, 1, (16, 24)))
    table = scale_quant_table(BASE_QUANT_TABLE, 75)
    grid = forward_quantize(im, table)
    expect = idct2(dequantize(grid.levels, table)).transpose(0, 2, 1, 3).reshape(16, 24)
    np.testing.assert_allclose(reconstruct(grid, table), expect, atol=1e-15)
