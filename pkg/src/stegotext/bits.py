"""Bit-level message plumbing: framing, padding, and byte serialization.

A message payload is a sequence of 0/1 ints.  On the wire it is framed
with a 32-bit big-endian length header (payload length in bits) so the
decoder knows when to stop.  Beyond the framed length the bit stream is
defined to continue with the fixed pad pattern 1,0,1,0,... which keeps
every coder deterministic without transmitting the padding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

HEADER_BITS = 32


def pad_bit(i: int) -> int:
    """The i-th bit of the infinite pad suffix 1,0,1,0,..."""
    return 1 - (i & 1)


def frame(payload: Sequence[int]) -> list[int]:
    """Prepend the 32-bit big-endian length header to a payload."""
    n = len(payload)
    if n >= 1 << HEADER_BITS:
        raise ValueError("payload too long for 32-bit length header")
    header = [(n >> (HEADER_BITS - 1 - i)) & 1 for i in range(HEADER_BITS)]
    return header + list(payload)


def unframe(bits: Sequence[int]) -> list[int]:
    """Strip the length header; raises if the stream is too short."""
    if len(bits) < HEADER_BITS:
        raise ValueError("stream shorter than the length header")
    n = 0
    for b in bits[:HEADER_BITS]:
        n = (n << 1) | b
    if len(bits) < HEADER_BITS + n:
        raise ValueError("stream shorter than the framed payload")
    return list(bits[HEADER_BITS : HEADER_BITS + n])


def padded_stream(bits: Sequence[int]) -> Callable[[int], int]:
    """Random access into ``bits`` extended by the infinite pad suffix."""
    n = len(bits)

    def bit_at(i: int) -> int:
        return bits[i] if i < n else pad_bit(i - n)

    return bit_at


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    """Pack bits MSB-first; the final partial byte is zero-padded."""
    out = bytearray()
    acc = 0
    fill = 0
    for b in bits:
        acc = (acc << 1) | (b & 1)
        fill += 1
        if fill == 8:
            out.append(acc)
            acc = 0
            fill = 0
    if fill:
        out.append(acc << (8 - fill))
    return bytes(out)


def bytes_to_bits(data: bytes, n_bits: int | None = None) -> list[int]:
    """Unpack bytes MSB-first, optionally truncating to ``n_bits``."""
    bits = []
    for byte in data:
        for shift in range(7, -1, -1):
            bits.append((byte >> shift) & 1)
    if n_bits is not None:
        if n_bits > len(bits):
            raise ValueError("fewer bits available than requested")
        bits = bits[:n_bits]
    return bits


def bits_from_hex(text: str) -> list[int]:
    return bytes_to_bits(bytes.fromhex(text.strip()))


def bits_to_hex(bits: Sequence[int]) -> str:
    return bits_to_bytes(bits).hex()


def random_bits(rng, n: int) -> list[int]:
    """n uniform bits from a numpy Generator."""
    return [int(b) for b in rng.integers(0, 2, size=n)]


@dataclass(frozen=True)
class BitMessage:
    """A secret payload of uniformly distributed bits."""

    payload: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.payload):
            raise ValueError("payload must contain only 0/1 bits")

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "BitMessage":
        return cls(tuple(int(b) for b in bits))

    @classmethod
    def from_bytes(cls, data: bytes) -> "BitMessage":
        return cls.from_bits(bytes_to_bits(data))

    @classmethod
    def from_hex(cls, text: str) -> "BitMessage":
        return cls.from_bits(bits_from_hex(text))

    def framed_bits(self) -> list[int]:
        return frame(self.payload)

    def to_bytes(self) -> bytes:
        return bits_to_bytes(self.payload)

    def __len__(self) -> int:
        return len(self.payload)
