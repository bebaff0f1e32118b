import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsr.bitio import BitReader, BitWriter, signed_to_unsigned, unsigned_to_signed
from dsr.errors import FormatError, TruncatedError
from dsr.metrics import binary_entropy
from dsr.rangecoder import LIMIT, BitModel, rc_decode_bits, rc_encode_bits


def test_ue_codewords():
    w = BitWriter()
    for v in (0, 1, 2, 3):
        w.write_ue(v)
    # 1 010 011 00100 -> 1010 0110 0100 0000
    assert w.getvalue() == bytes([0b10100110, 0b01000000])


def test_se_mapping():
    assert [signed_to_unsigned(v) for v in (0, 1, -1, 2, -2)] == [0, 1, 2, 3, 4]
    assert [unsigned_to_signed(u) for u in range(5)] == [0, 1, -1, 2, -2]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-(2**20), 2**20), max_size=200))
def test_exp_golomb_round_trip(values):
    w = BitWriter()
    for v in values:
        w.write_se(v)
    w.write_ue(7)
    w.write_bits(5, 3)
    r = BitReader(w.getvalue())
    assert [r.read_se() for _ in values] == values
    assert r.read_ue() == 7 and r.read_bits(3) == 5
    assert r.remaining() < 8


def test_reader_exhaustion():
    with pytest.raises(FormatError):
        BitReader(b"\x00").read_ue()
    with pytest.raises(FormatError):
        BitReader(b"\x01").read_bits(9)
    with pytest.raises(ValueError):
        BitWriter().write_ue(-1)


def test_empty_input_gives_empty_output():
    assert rc_encode_bits([]) == b""
    assert rc_decode_bits(b"", 0).size == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), max_size=3000))
def test_range_coder_round_trip(bits):
    data = rc_encode_bits(bits)
    np.testing.assert_array_equal(rc_decode_bits(data, len(bits)), np.array(bits, dtype=np.uint8))


@pytest.mark.parametrize("p", [0.001, 0.11, 0.5, 0.97])
def test_range_coder_round_trip_long(p):
    bits = (np.random.default_rng(int(p * 1000)).random(200_000) < p).astype(np.uint8)
    np.testing.assert_array_equal(rc_decode_bits(rc_encode_bits(bits), bits.size), bits)


def test_round_trip_million_bits():
    bits = (np.random.default_rng(5).random(1_000_000) < 0.3).astype(np.uint8)
    np.testing.assert_array_equal(rc_decode_bits(rc_encode_bits(bits), bits.size), bits)


def test_all_zero_bits_are_cheap():
    assert len(rc_encode_bits(np.zeros(100_000, dtype=np.uint8))) < 200


def test_fair_coin_costs_one_bit_each():
    bits = np.random.default_rng(0).integers(0, 2, 100_000)
    assert abs(len(rc_encode_bits(bits)) - 12500) <= 125


@pytest.mark.parametrize("p", [0.05, 0.11, 0.3])
def test_output_near_entropy(p):
    bits = (np.random.default_rng(1).random(100_000) < p).astype(np.uint8)
    ideal = bits.size * binary_entropy(int(bits.sum()), bits.size) / 8
    assert len(rc_encode_bits(bits)) <= 1.02 * ideal + 64


def test_truncated_stream():
    bits = np.random.default_rng(2).integers(0, 2, 5000)
    data = rc_encode_bits(bits)
    with pytest.raises(TruncatedError):
        rc_decode_bits(data[: len(data) // 2], bits.size)


def test_carry_propagation():
    # long runs of ones after a skewed prefix push low over 2**32 repeatedly
    bits = np.concatenate([np.zeros(3000), np.ones(3000), np.zeros(50), np.ones(20000)]).astype(np.uint8)
    np.testing.assert_array_equal(rc_decode_bits(rc_encode_bits(bits), bits.size), bits)


def test_model_halving():
    m = BitModel()
    for _ in range(LIMIT):
        m.update(1)
    assert m.c0 >= 1 and m.c0 + m.c1 < LIMIT
    assert m.c1 > 1000 * m.c0
