"""MSB-first bit packing with Exp-Golomb integer codes."""

from __future__ import annotations

from .errors import FormatError

__all__ = ["BitWriter", "BitReader", "signed_to_unsigned", "unsigned_to_signed"]


def signed_to_unsigned(v: int) -> int:
    """0, 1, -1, 2, -2, ... -> 0, 1, 2, 3, 4, ..."""
    return 2 * v - 1 if v > 0 else -2 * v


def unsigned_to_signed(u: int) -> int:
    return (u + 1) // 2 if u & 1 else -(u // 2)


class BitWriter:
    # bits are collected as '0'/'1' text and packed once at the end
    def __init__(self):
        self._parts: list[str] = []

    def write_bits(self, value: int, nbits: int) -> None:
        if nbits:
            self._parts.append(format(value, f"0{nbits}b"))

    def write_ue(self, v: int) -> None:
        if v < 0:
            raise ValueError("unsigned Exp-Golomb needs a non-negative value")
        code = format(v + 1, "b")
        self._parts.append("0" * (len(code) - 1))
        self._parts.append(code)

    def write_se(self, v: int) -> None:
        self.write_ue(signed_to_unsigned(v))

    def getvalue(self) -> bytes:
        bits = "".join(self._parts)
        if not bits:
            return b""
        bits += "0" * (-len(bits) % 8)
        return int(bits, 2).to_bytes(len(bits) // 8, "big")


class BitReader:
    def __init__(self, data: bytes):
        self._bits = "".join(format(b, "08b") for b in data)
        self.pos = 0

    def read_bits(self, nbits: int) -> int:
        end = self.pos + nbits
        if end > len(self._bits):
            raise FormatError("bit stream exhausted")
        value = int(self._bits[self.pos : end], 2) if nbits else 0
        self.pos = end
        return value

    def read_ue(self) -> int:
        one = self._bits.find("1", self.pos)
        if one < 0:
            raise FormatError("bit stream exhausted inside an Exp-Golomb prefix")
        zeros = one - self.pos
        self.pos = one
        return self.read_bits(zeros + 1) - 1

    def read_se(self) -> int:
        return unsigned_to_signed(self.read_ue())

    def remaining(self) -> int:
        return len(self._bits) - self.pos
