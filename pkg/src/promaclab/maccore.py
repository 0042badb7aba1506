"""Bit-addressable MAC core: HMAC-SHA-256, truncation, and fragment indexing.

Every bit string here is MSB-first. The full-strength MAC of a message is
computed over the fixed-width framed record (8-byte big-endian sequence
number followed by the payload) so that (seq, payload) boundaries are
unambiguous. The PRF is injectable so tests and instrumented runs can swap
in deterministic stubs.
"""

from __future__ import annotations

import hmac
import hashlib
from dataclasses import dataclass

MAX_PAYLOAD = 65535
MAX_SEQ = 2**64 - 1


class Bits:
    """Immutable MSB-first bit string of fixed length."""

    __slots__ = ("value", "length")

    def __init__(self, value: int, length: int):
        if length < 0:
            raise ValueError("negative length")
        if value < 0 or value >> length:
            raise ValueError(f"value does not fit in {length} bits")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "length", length)

    def __setattr__(self, *a):
        raise AttributeError("Bits is immutable")

    @classmethod
    def zeros(cls, length: int) -> "Bits":
        return cls(0, length)

    @classmethod
    def ones(cls, length: int) -> "Bits":
        return cls((1 << length) - 1, length)

    @classmethod
    def from_bytes(cls, data: bytes, length: int | None = None) -> "Bits":
        """Interpret data MSB-first, keeping the first `length` bits."""
        total = len(data) * 8
        if length is None:
            length = total
        if length > total:
            raise ValueError("not enough bytes")
        return cls(int.from_bytes(data, "big") >> (total - length), length)

    @classmethod
    def from_str(cls, s: str) -> "Bits":
        return cls(int(s, 2) if s else 0, len(s))

    def bit(self, i: int) -> int:
        """Bit at MSB-first index i."""
        if not 0 <= i < self.length:
            raise IndexError(f"bit index {i} out of range for {self.length} bits")
        return (self.value >> (self.length - 1 - i)) & 1

    def prefix(self, n: int) -> "Bits":
        if n > self.length:
            raise ValueError("prefix longer than source")
        return Bits(self.value >> (self.length - n), n)

    def to_bytes(self) -> bytes:
        """Pack MSB-first, zero-padded to a byte boundary."""
        nbytes = (self.length + 7) // 8
        return (self.value << (nbytes * 8 - self.length)).to_bytes(nbytes, "big")

    def __xor__(self, other: "Bits") -> "Bits":
        if self.length != other.length:
            raise ValueError("length mismatch")
        return Bits(self.value ^ other.value, self.length)

    def __eq__(self, other):
        return (
            isinstance(other, Bits)
            and self.value == other.value
            and self.length == other.length
        )

    def __hash__(self):
        return hash((self.value, self.length))

    def __len__(self):
        return self.length

    def __repr__(self):
        return f"Bits({format(self.value, f'0{self.length}b') if self.length else ''!r})"


@dataclass(frozen=True)
class Key:
    """Pre-shared MAC secret, 16..64 bytes."""

    data: bytes

    def __post_init__(self):
        if not 16 <= len(self.data) <= 64:
            raise ValueError("key must be 16..64 bytes")

    @classmethod
    def from_hex(cls, s: str) -> "Key":
        return cls(bytes.fromhex(s))


@dataclass(frozen=True)
class MessageRecord:
    """One message of a stream: sequence counter plus payload."""

    seq: int
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.seq <= MAX_SEQ:
            raise ValueError("seq out of 64-bit range")
        if len(self.payload) > MAX_PAYLOAD:
            raise ValueError("payload longer than 65535 bytes")


def frame_record(record: MessageRecord) -> bytes:
    """Fixed-width framing hashed by the full-strength MAC."""
    return record.seq.to_bytes(8, "big") + record.payload


def keyed_mac(key: Key, data: bytes, out_bits: int) -> Bits:
    """HMAC-SHA-256 truncated MSB-first to out_bits (<= 256)."""
    if not 0 < out_bits <= 256:
        raise ValueError("out_bits must be in 1..256")
    digest = hmac.new(key.data, data, hashlib.sha256).digest()
    return Bits.from_bytes(digest, out_bits)

#: Injectable PRF signature: (key, data, out_bits) -> Bits.
PrfFn = type(keyed_mac)


def base_mac(key: Key, record: MessageRecord, security_bits: int = 128, prf=keyed_mac) -> Bits:
    """Full-strength MAC over the framed record, truncated to security_bits."""
    return prf(key, frame_record(record), security_bits)


def fragment_bit(tag: Bits, part: int, bit: int, tag_bits: int) -> int:
    """Bit `bit` of fragment `part` when the tag is split into tag_bits-wide parts.

    Fragment addressing is the bijection (part, bit) -> part*tag_bits + bit,
    so every source bit lands in exactly one downstream tag.
    """
    if part < 0 or bit < 0 or bit >= tag_bits:
        raise IndexError("fragment coordinates out of range")
    idx = part * tag_bits + bit
    if idx >= tag.length:
        raise IndexError(f"fragment index {idx} beyond {tag.length}-bit tag")
    return tag.bit(idx)
