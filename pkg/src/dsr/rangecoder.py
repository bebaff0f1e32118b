"""Adaptive binary range coder with a single frequency-count context.

The coder keeps a 32-bit ``range`` and renormalises a byte at a time whenever
it drops below 2**24, with LZMA-style carry propagation. The model starts at
``c0 = c1 = 1``, predicts ``p1 = c1 / (c0 + c1)``, increments the count of each
coded symbol and halves both counts (keeping them >= 1) once their sum reaches
65536.
"""

from __future__ import annotations

import numpy as np

from .errors import TruncatedError

__all__ = ["BitModel", "RangeEncoder", "RangeDecoder", "rc_encode_bits", "rc_decode_bits"]

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF
LIMIT = 1 << 16


class BitModel:
    __slots__ = ("c0", "c1")

    def __init__(self):
        self.c0 = 1
        self.c1 = 1

    def update(self, bit: int) -> None:
        if bit:
            self.c1 += 1
        else:
            self.c0 += 1
        if self.c0 + self.c1 >= LIMIT:
            self.c0 = max(1, self.c0 >> 1)
            self.c1 = max(1, self.c1 >> 1)


class RangeEncoder:
    def __init__(self):
        self.low = 0
        self.range = _MASK32
        self._cache = 0
        self._cache_size = 1
        self._out = bytearray()

    def _shift_low(self):
        if (self.low & _MASK32) < 0xFF000000 or self.low > _MASK32:
            carry = self.low >> 32
            temp = self._cache
            while True:
                self._out.append((temp + carry) & 0xFF)
                temp = 0xFF
                self._cache_size -= 1
                if not self._cache_size:
                    break
            self._cache = (self.low >> 24) & 0xFF
        self._cache_size += 1
        self.low = (self.low & 0x00FFFFFF) << 8

    def encode(self, bit: int, model: BitModel) -> None:
        bound = (self.range // (model.c0 + model.c1)) * model.c0
        if bit:
            self.low += bound
            self.range -= bound
        else:
            self.range = bound
        while self.range < _TOP:
            self.range <<= 8
            self._shift_low()
        model.update(bit)

    def finish(self) -> bytes:
        for _ in range(5):
            self._shift_low()
        return bytes(self._out)


class RangeDecoder:
    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self.range = _MASK32
        self.code = 0
        for _ in range(5):
            self.code = ((self.code << 8) | self._next()) & _MASK32

    def _next(self) -> int:
        if self._pos >= len(self._data):
            raise TruncatedError("range-coded stream ended early")
        b = self._data[self._pos]
        self._pos += 1
        return b

    def decode(self, model: BitModel) -> int:
        bound = (self.range // (model.c0 + model.c1)) * model.c0
        if self.code < bound:
            self.range = bound
            bit = 0
        else:
            self.code -= bound
            self.range -= bound
            bit = 1
        while self.range < _TOP:
            self.range <<= 8
            self.code = ((self.code << 8) | self._next()) & _MASK32
        model.update(bit)
        return bit


def rc_encode_bits(bits, model: BitModel | None = None) -> bytes:
    """Range-code a bit sequence under one adaptive context (empty input gives empty output)."""
    model = BitModel() if model is None else model
    if len(bits) == 0:
        return b""
    enc = RangeEncoder()
    for b in np.asarray(bits, dtype=np.uint8).tolist():
        enc.encode(b, model)
    return enc.finish()


def rc_decode_bits(data: bytes, count: int, model: BitModel | None = None) -> np.ndarray:
    """Decode ``count`` bits produced by :func:`rc_encode_bits`."""
    model = BitModel() if model is None else model
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    dec = RangeDecoder(data)
    return np.fromiter((dec.decode(model) for _ in range(count)), dtype=np.uint8, count=count)
