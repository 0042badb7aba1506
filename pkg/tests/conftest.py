import pytest

from promaclab.maccore import Bits, Key


@pytest.fixture
def key():
    return Key(bytes(range(16)))


def zero_prf(key, data, out_bits):
    return Bits.zeros(out_bits)


def parity_prf(key, data, out_bits):
    """Record-framed stub: all-ones when seq is odd, zeros otherwise."""
    seq = int.from_bytes(data[:8], "big")
    return Bits.ones(out_bits) if seq % 2 else Bits.zeros(out_bits)


class CountingPrf:
    """Wraps a PRF and counts invocations."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = 0

    def __call__(self, key, data, out_bits):
        self.calls += 1
        return self.inner(key, data, out_bits)
