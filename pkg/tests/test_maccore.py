import hashlib

import pytest
from hypothesis import given, strategies as st

from promaclab.maccore import (
    Bits,
    Key,
    MessageRecord,
    base_mac,
    fragment_bit,
    frame_record,
    keyed_mac,
)


def hmac_sha256_oracle(key: bytes, msg: bytes) -> bytes:
    """Inline RFC 2104 construction, independent of the hmac module."""
    if len(key) > 64:
        key = hashlib.sha256(key).digest()
    key = key + b"\x00" * (64 - len(key))
    inner = hashlib.sha256(bytes(b ^ 0x36 for b in key) + msg).digest()
    return hashlib.sha256(bytes(b ^ 0x5C for b in key) + inner).digest()


# oracle output for key 00..0f over the framed record (seq=0, empty payload),
# frozen from a run of hmac_sha256_oracle
FROZEN_SEQ0 = "c6b0c5d1fb6453704bbc7024fa5bca77"
FROZEN_SEQ1 = "0825399ee1cbb62b832ba5c2ac01c026"


class TestBits:
    def test_msb_first_indexing(self):
        b = Bits.from_str("101101")
        assert [b.bit(i) for i in range(6)] == [1, 0, 1, 1, 0, 1]

    def test_prefix_is_leading_bits(self):
        assert Bits.from_str("101101").prefix(3) == Bits.from_str("101")

    def test_to_bytes_pads_to_byte_boundary(self):
        assert Bits.from_str("101").to_bytes() == b"\xa0"
        assert Bits.from_str("1" * 9).to_bytes() == b"\xff\x80"

    def test_value_must_fit(self):
        with pytest.raises(ValueError):
            Bits(4, 2)

    @given(st.binary(min_size=0, max_size=40), st.data())
    def test_bytes_roundtrip(self, data, draw):
        length = draw.draw(st.integers(0, len(data) * 8))
        b = Bits.from_bytes(data, length)
        assert Bits.from_bytes(b.to_bytes(), length) == b

    def test_xor_requires_equal_length(self):
        with pytest.raises(ValueError):
            Bits.from_str("101") ^ Bits.from_str("10")


class TestKeyRecord:
    def test_key_length_limits(self):
        with pytest.raises(ValueError):
            Key(b"short")
        with pytest.raises(ValueError):
            Key(b"x" * 65)
        assert Key.from_hex("00" * 16).data == bytes(16)

    def test_record_limits(self):
        with pytest.raises(ValueError):
            MessageRecord(-1, b"")
        with pytest.raises(ValueError):
            MessageRecord(2**64, b"")
        with pytest.raises(ValueError):
            MessageRecord(0, b"x" * 65536)

    def test_framing_is_fixed_width(self):
        assert frame_record(MessageRecord(1, b"ab")) == b"\x00" * 7 + b"\x01ab"


class TestBaseMac:
    def test_matches_independent_oracle(self, key):
        got = base_mac(key, MessageRecord(0, b""))
        want = hmac_sha256_oracle(key.data, (0).to_bytes(8, "big"))[:16]
        assert got.to_bytes() == want
        assert got.to_bytes().hex() == FROZEN_SEQ0

    def test_oracle_cross_check_with_payload(self, key):
        rec = MessageRecord(7, b"payload")
        want = hmac_sha256_oracle(key.data, frame_record(rec))
        assert base_mac(key, rec, security_bits=128).to_bytes() == want[:16]

    def test_deterministic(self, key):
        r = MessageRecord(3, b"abc")
        assert base_mac(key, r) == base_mac(key, r)

    def test_seq_changes_tag(self, key):
        a = base_mac(key, MessageRecord(0, b""))
        b = base_mac(key, MessageRecord(1, b""))
        assert a != b
        assert b.to_bytes().hex() == FROZEN_SEQ1

    def test_truncation_is_prefix_of_full_mac(self, key):
        full = keyed_mac(key, b"data", 256)
        short = keyed_mac(key, b"data", 96)
        assert full.prefix(96) == short

    def test_output_length(self, key):
        assert len(base_mac(key, MessageRecord(0, b""), security_bits=96)) == 96

    def test_out_bits_range(self, key):
        with pytest.raises(ValueError):
            keyed_mac(key, b"", 0)
        with pytest.raises(ValueError):
            keyed_mac(key, b"", 257)


class TestFragmentBit:
    def test_all_zero_tag(self):
        sigma = Bits.zeros(6)
        for a in range(3):
            for b in range(2):
                assert fragment_bit(sigma, a, b, 2) == 0

    def test_documented_cases(self):
        sigma = Bits.from_str("101101")
        assert fragment_bit(sigma, 1, 0, 2) == 1  # index 2
        assert fragment_bit(sigma, 2, 1, 2) == 1  # index 5
        assert fragment_bit(sigma, 0, 1, 2) == 0  # index 1

    def test_out_of_range(self):
        sigma = Bits.from_str("101101")
        with pytest.raises(IndexError):
            fragment_bit(sigma, 3, 0, 2)
        with pytest.raises(IndexError):
            fragment_bit(sigma, 0, 2, 2)

    @given(st.sampled_from([8, 16, 32, 64]))
    def test_addressing_is_a_bijection(self, tag_bits):
        security = 128
        parts = security // tag_bits
        seen = set()
        sigma = Bits(int.from_bytes(hashlib.sha256(b"x").digest()[:16], "big"), security)
        for a in range(parts):
            for b in range(tag_bits):
                idx = a * tag_bits + b
                assert fragment_bit(sigma, a, b, tag_bits) == sigma.bit(idx)
                seen.add(idx)
        assert seen == set(range(security))
