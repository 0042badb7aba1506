"""Streaming signers and receiver-side security accounting.

Five tag constructions share one packet shape: the staggered per-bit XOR
scheme driven by a dependency profile, three sliding-window schemes
(substate-chain, fragment-aggregation, history-hash), and the plain
truncated MAC baseline. Senders are incremental state machines; receivers
are ledgers that replay the stream (packets and known losses, in sequence
order) and track how much verified protection each message has accrued.

Receivers finalize a message once no future tag can cover it; aggregate
statistics survive finalization so multi-million-packet streams run in
bounded memory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .depsets import DependencyProfile, window_profile
from .maccore import Bits, Key, MessageRecord, frame_record, keyed_mac

__all__ = [
    "Packet",
    "Loss",
    "ProtocolError",
    "VerificationReport",
    "SpMacSender",
    "WhipsSender",
    "CuMacSender",
    "MiniMacSender",
    "TruncatedSender",
    "truncated_sign",
    "SpMacLedger",
    "WindowLedger",
    "LedgerStats",
    "transform_transcript",
    "window_depth",
    "encode_packet",
    "decode_packet",
    "WHIPS_SUBSTATE_LABEL",
    "WHIPS_TAG_LABEL",
]

WHIPS_SUBSTATE_LABEL = b"\x01"
WHIPS_TAG_LABEL = b"\x02"


class ProtocolError(Exception):
    """Out-of-order, duplicate, or malformed stream input."""


@dataclass(frozen=True)
class Packet:
    seq: int
    payload: bytes
    tag: Bits


@dataclass(frozen=True)
class Loss:
    """Marker for a sequence number known to be missing."""

    seq: int


def encode_packet(pkt: Packet) -> bytes:
    """seq (8B BE) | payload length (2B BE) | payload | tag bits, MSB-first padded."""
    return (
        pkt.seq.to_bytes(8, "big")
        + len(pkt.payload).to_bytes(2, "big")
        + pkt.payload
        + pkt.tag.to_bytes()
    )


def decode_packet(data: bytes, tag_bits: int) -> Packet:
    if len(data) < 10:
        raise ProtocolError("truncated packet header")
    seq = int.from_bytes(data[:8], "big")
    plen = int.from_bytes(data[8:10], "big")
    tag_bytes = (tag_bits + 7) // 8
    if len(data) != 10 + plen + tag_bytes:
        raise ProtocolError("packet length mismatch")
    payload = data[10:10 + plen]
    tag = Bits.from_bytes(data[10 + plen:], tag_bits)
    return Packet(seq, payload, tag)


def window_depth(scheme: str, tag_bits: int, security_bits: int) -> int:
    """History length n for the sliding-window schemes."""
    if scheme == "truncated":
        return 1
    if scheme == "whips":
        return math.ceil(security_bits / tag_bits)
    if security_bits % tag_bits:
        raise ValueError(f"{scheme} needs security_bits divisible by tag_bits")
    return security_bits // tag_bits


class SpMacSender:
    """Staggered per-bit XOR aggregation over a dependency profile.

    A ring of pending tag accumulators holds the XOR folds of earlier
    messages' MACs. Signing computes one full-strength MAC and XORs its
    first tag_bits bits into the emitted tag (the only online fold); the
    MAC's remaining contributions are folded forward by preprocess(),
    which sign() triggers lazily when it was not called in idle time.
    """

    def __init__(self, key: Key, profile: DependencyProfile, prf=keyed_mac):
        self.key = key
        self.profile = profile
        self.prf = prf
        self.next_seq = 0
        size = profile.max_delay + 1
        self._ring = [0] * size
        self._fills = [bytearray(profile.tag_bits) for _ in range(size)]
        self._base = 0
        self._pending = None  # MAC of the last signed message, not yet folded
        # fold plan: per future offset d, the (source bit, tag bit) pairs
        plan: dict[int, list[tuple[int, int]]] = {}
        t = profile.tag_bits
        for j, dep in enumerate(profile.bit_deps):
            for n, d in enumerate(dep.marks):
                if n == 0:
                    continue  # own contribution, folded online
                plan.setdefault(d, []).append((n * t + j, j))
        self._plan = sorted(plan.items())
        self.base_mac_calls = 0
        self.online_folds = 0
        self.preprocess_folds = 0

    def _slot(self, offset: int) -> int:
        return (self._base + offset) % len(self._ring)

    def preprocess(self):
        """Fold the last MAC's future contributions into the pending ring."""
        if self._pending is None:
            return
        sigma = self._pending
        self._pending = None
        sec = self.profile.security_bits
        t = self.profile.tag_bits
        for d, pairs in self._plan:
            # sigma belongs to seq next_seq-1: offset d lands at ring slot d-1
            acc = 0
            fills = self._fills[self._slot(d - 1)]
            for src, j in pairs:
                acc |= ((sigma >> (sec - 1 - src)) & 1) << (t - 1 - j)
                fills[j] += 1
            self._ring[self._slot(d - 1)] ^= acc
        self.preprocess_folds += 1

    def sign(self, payload: bytes) -> Packet:
        self.preprocess()
        seq = self.next_seq
        record = MessageRecord(seq, payload)
        sigma = self.prf(self.key, frame_record(record), self.profile.security_bits)
        self.base_mac_calls += 1
        t = self.profile.tag_bits
        own = sigma.value >> (self.profile.security_bits - t)
        slot = self._slot(0)
        tag_value = self._ring[slot] ^ own
        self.online_folds += 1
        fills = self._fills[slot]
        for j, dep in enumerate(self.profile.bit_deps):
            fills[j] += 1
            if seq >= self.profile.max_delay and fills[j] != dep.order:
                raise AssertionError(
                    f"bit {j} of tag {seq} accumulated {fills[j]} contributions, "
                    f"expected {dep.order}"
                )
        self._ring[slot] = 0
        self._fills[slot] = bytearray(t)
        self._base = (self._base + 1) % len(self._ring)
        self.next_seq = seq + 1
        self._pending = sigma.value
        return Packet(seq, payload, Bits(tag_value, t))


def transform_transcript(base_tags, profile: DependencyProfile) -> list[Bits]:
    """Recompute the staggered tag stream from full-strength MACs alone.

    Public transform: no key involved, demonstrating that the scheme's
    tags are a function of the underlying MACs. Also serves as the
    from-scratch oracle for the incremental sender. base_tags is the
    sequence of full-strength MACs indexed by seq (Bits or raw ints).
    """
    sec = profile.security_bits
    t = profile.tag_bits
    vals = [b.value if isinstance(b, Bits) else int(b) for b in base_tags]
    out = []
    for i in range(len(vals)):
        tag = 0
        for j, dep in enumerate(profile.bit_deps):
            bit = 0
            for n, d in enumerate(dep.marks):
                src = i - d
                if src >= 0:
                    bit ^= (vals[src] >> (sec - 1 - (n * t + j))) & 1
            tag |= bit << (t - 1 - j)
        out.append(Bits(tag, t))
    return out


class WhipsSender:
    """Substate-chain construction: one MAC for the substate, one for the tag."""

    SUBSTATE_BYTES = 32

    def __init__(self, key: Key, tag_bits: int, security_bits: int = 128, prf=keyed_mac):
        self.key = key
        self.tag_bits = tag_bits
        self.security_bits = security_bits
        self.prf = prf
        self.n = window_depth("whips", tag_bits, security_bits)
        self.next_seq = 0
        self._substates = [b"\x00" * self.SUBSTATE_BYTES] * self.n
        self.base_mac_calls = 0

    def sign(self, payload: bytes) -> Packet:
        seq = self.next_seq
        MessageRecord(seq, payload)  # range validation
        substate = self.prf(self.key, WHIPS_SUBSTATE_LABEL + payload, 256).to_bytes()
        self.base_mac_calls += 1
        self._substates.append(substate)
        del self._substates[0]
        state = seq.to_bytes(8, "big") + b"".join(self._substates)
        tag = self.prf(self.key, WHIPS_TAG_LABEL + state, self.tag_bits)
        self.base_mac_calls += 1
        self.next_seq = seq + 1
        return Packet(seq, payload, tag)


class CuMacSender:
    """Fragment aggregation: the full MAC is split into n tag-sized pieces
    and each piece is XORed into one of the next n tags."""

    def __init__(self, key: Key, tag_bits: int, security_bits: int = 128, prf=keyed_mac):
        self.key = key
        self.tag_bits = tag_bits
        self.security_bits = security_bits
        self.prf = prf
        self.n = window_depth("cumac", tag_bits, security_bits)
        self.next_seq = 0
        self._ring = [0] * self.n
        self._base = 0
        self.base_mac_calls = 0

    def sign(self, payload: bytes) -> Packet:
        seq = self.next_seq
        record = MessageRecord(seq, payload)
        sigma = self.prf(self.key, frame_record(record), self.security_bits).value
        self.base_mac_calls += 1
        t = self.tag_bits
        mask = (1 << t) - 1
        for a in range(self.n):
            frag = (sigma >> (self.security_bits - (a + 1) * t)) & mask
            self._ring[(self._base + a) % self.n] ^= frag
        slot = self._base
        tag_value = self._ring[slot]
        self._ring[slot] = 0
        self._base = (self._base + 1) % self.n
        self.next_seq = seq + 1
        return Packet(seq, payload, Bits(tag_value, t))


class MiniMacSender:
    """History hash: the tag authenticates the counter plus the last n payloads."""

    def __init__(self, key: Key, tag_bits: int, security_bits: int = 128, prf=keyed_mac):
        self.key = key
        self.tag_bits = tag_bits
        self.security_bits = security_bits
        self.prf = prf
        self.n = window_depth("minimac", tag_bits, security_bits)
        self.next_seq = 0
        self._history = [b""] * self.n  # zero-init warm-up history
        self.base_mac_calls = 0
        self.hashed_bytes = 0

    def sign(self, payload: bytes) -> Packet:
        seq = self.next_seq
        MessageRecord(seq, payload)
        self._history.append(payload)
        del self._history[0]
        data = seq.to_bytes(8, "big") + b"".join(
            len(m).to_bytes(2, "big") + m for m in self._history
        )
        tag = self.prf(self.key, data, self.tag_bits)
        self.base_mac_calls += 1
        self.hashed_bytes += len(data)
        self.next_seq = seq + 1
        return Packet(seq, payload, tag)


class TruncatedSender:
    """Plain truncated MAC baseline."""

    def __init__(self, key: Key, tag_bits: int, security_bits: int = 128, prf=keyed_mac):
        self.key = key
        self.tag_bits = tag_bits
        self.security_bits = security_bits
        self.prf = prf
        self.next_seq = 0
        self.base_mac_calls = 0

    def sign(self, payload: bytes) -> Packet:
        seq = self.next_seq
        record = MessageRecord(seq, payload)
        sigma = self.prf(self.key, frame_record(record), self.security_bits)
        self.base_mac_calls += 1
        self.next_seq = seq + 1
        return Packet(seq, payload, sigma.prefix(self.tag_bits))


def truncated_sign(key: Key, record: MessageRecord, tag_bits: int,
                   security_bits: int = 128, prf=keyed_mac) -> Packet:
    """One-shot truncated-MAC signing."""
    sigma = prf(key, frame_record(record), security_bits)
    return Packet(record.seq, record.payload, sigma.prefix(tag_bits))


@dataclass
class VerificationReport:
    """Outcome of one ledger event: counts of tag bits decided by it."""

    seq: int
    received: bool
    bits_matched: int = 0
    bits_mismatched: int = 0
    bits_lost: int = 0
    newly_suspected: tuple[int, ...] = ()


@dataclass
class LedgerStats:
    """Aggregates that survive message finalization."""

    received: int = 0
    lost: int = 0
    finalized: int = 0
    zero_accrued: int = 0
    min_accrued: int | None = None
    suspected: int = 0

    def record(self, accrued: int, suspect: bool):
        self.finalized += 1
        if accrued == 0:
            self.zero_accrued += 1
        if self.min_accrued is None or accrued < self.min_accrued:
            self.min_accrued = accrued
        if suspect:
            self.suspected += 1


class _LedgerBase:
    """Sequence-ordered event intake, retention, and finalization plumbing."""

    def __init__(self, horizon: int, keep_history: bool):
        self.horizon = horizon
        self.keep_history = keep_history
        self.next_seq = 0
        self.accrued: dict[int, int] = {}
        self.suspect: set[int] = set()
        self.lost: set[int] = set()
        self.stats = LedgerStats()
        self.final_accrued: dict[int, int] = {}
        self.final_suspect: set[int] = set()

    def _admit(self, event) -> bool:
        seq = event.seq
        if seq != self.next_seq:
            raise ProtocolError(f"expected seq {self.next_seq}, got {seq}")
        self.next_seq = seq + 1
        received = isinstance(event, Packet)
        if received:
            self.stats.received += 1
            self.accrued[seq] = self.accrued.get(seq, 0)
        else:
            self.stats.lost += 1
            self.lost.add(seq)
        return received

    def _finalize_seq(self, seq: int):
        if seq in self.lost:
            self.lost.discard(seq)
            return
        acc = self.accrued.pop(seq, 0)
        suspect = seq in self.suspect
        self.suspect.discard(seq)
        self.stats.record(acc, suspect)
        if self.keep_history:
            self.final_accrued[seq] = acc
            if suspect:
                self.final_suspect.add(seq)

    def _retire(self, newest: int):
        old = newest - self.horizon
        if old >= 0:
            self._drop_state(old)
            self._finalize_seq(old)

    def _drop_state(self, seq: int):
        raise NotImplementedError

    def finalize(self):
        """Settle every message still pending (end of stream)."""
        for seq in range(max(0, self.next_seq - self.horizon), self.next_seq):
            self._drop_state(seq)
            if seq in self.accrued or seq in self.lost:
                self._finalize_seq(seq)

    def accrued_bits(self, seq: int) -> int:
        if seq in self.accrued:
            return self.accrued[seq]
        if seq in self.final_accrued:
            return self.final_accrued[seq]
        raise KeyError(f"seq {seq} unknown or finalized without history")

    def is_suspected(self, seq: int) -> bool:
        return seq in self.suspect or seq in self.final_suspect


class SpMacLedger(_LedgerBase):
    """Per-bit accounting for the staggered scheme.

    A tag bit is decided the moment its packet arrives: all dependencies
    have lower sequence numbers, so their status is already known. Bits
    whose dependencies include a lost packet are written off; the rest are
    compared against the recomputed XOR and credit every message in the
    bit's dependency set.
    """

    def __init__(self, key: Key, profile: DependencyProfile, prf=keyed_mac,
                 keep_history: bool = True):
        super().__init__(profile.max_delay + 1, keep_history)
        self.key = key
        self.profile = profile
        self.prf = prf
        self._sigmas: dict[int, int] = {}
        self._bit_plan = [
            (j, dep.marks, [n * profile.tag_bits + j for n in range(dep.order)])
            for j, dep in enumerate(profile.bit_deps)
        ]
        self.bit_verdicts: dict[tuple[int, int], str] = {} if keep_history else None

    def _drop_state(self, seq: int):
        self._sigmas.pop(seq, None)

    def receive(self, event) -> VerificationReport:
        received = self._admit(event)
        seq = event.seq
        report = VerificationReport(seq, received)
        if not received:
            self._retire(seq)
            return report
        if event.tag.length != self.profile.tag_bits:
            raise ProtocolError("tag length does not match profile")
        sec = self.profile.security_bits
        sigma = self.prf(self.key, frame_record(MessageRecord(seq, event.payload)), sec).value
        self._sigmas[seq] = sigma
        lost = self.lost
        sigmas = self._sigmas
        accrued = self.accrued
        newly_suspected = []
        for j, marks, srcs in self._bit_plan:
            covered = []
            dead = False
            for d in marks:
                q = seq - d
                if q < 0:
                    continue
                if q in lost:
                    dead = True
                    break
                covered.append(q)
            if dead:
                report.bits_lost += 1
                if self.bit_verdicts is not None:
                    self.bit_verdicts[(seq, j)] = "unverifiable-lost"
                continue
            expected = 0
            for n, d in enumerate(marks):
                q = seq - d
                if q >= 0:
                    expected ^= (sigmas[q] >> (sec - 1 - srcs[n])) & 1
            if expected == event.tag.bit(j):
                report.bits_matched += 1
                for q in covered:
                    accrued[q] += 1
                if self.bit_verdicts is not None:
                    self.bit_verdicts[(seq, j)] = "verified-ok"
            else:
                report.bits_mismatched += 1
                for q in covered:
                    if q not in self.suspect:
                        self.suspect.add(q)
                        newly_suspected.append(q)
                if self.bit_verdicts is not None:
                    self.bit_verdicts[(seq, j)] = "mismatch"
        report.newly_suspected = tuple(newly_suspected)
        self._retire(seq)
        return report


class WindowLedger(_LedgerBase):
    """Whole-tag accounting for the sliding-window schemes.

    A tag is verifiable iff its full message window arrived; a verifiable
    matching tag credits tag_bits to every covered message. scheme
    "window" skips cryptographic recomputation and treats verifiable tags
    as matching: the dependency structure alone decides accounting, which
    is exactly the behaviour of any window scheme on an honest stream.
    """

    def __init__(self, key: Key, scheme: str, tag_bits: int, security_bits: int = 128,
                 prf=keyed_mac, keep_history: bool = True):
        if scheme not in ("whips", "cumac", "minimac", "truncated", "window"):
            raise ValueError(f"unknown window scheme {scheme!r}")
        self.scheme = scheme
        self.tag_bits = tag_bits
        self.security_bits = security_bits
        self.n = window_depth("cumac" if scheme == "window" else scheme,
                              tag_bits, security_bits)
        super().__init__(self.n, keep_history)
        self.key = key
        self.prf = prf
        self._payloads: dict[int, bytes] = {}
        self.tag_verdicts: dict[int, str] = {} if keep_history else None

    def _drop_state(self, seq: int):
        self._payloads.pop(seq, None)

    def _expected_tag(self, seq: int) -> Bits:
        first = seq - self.n + 1
        if self.scheme == "whips":
            parts = []
            for q in range(first, seq + 1):
                if q < 0:
                    parts.append(b"\x00" * WhipsSender.SUBSTATE_BYTES)
                else:
                    parts.append(self.prf(self.key, WHIPS_SUBSTATE_LABEL + self._payloads[q], 256).to_bytes())
            state = seq.to_bytes(8, "big") + b"".join(parts)
            return self.prf(self.key, WHIPS_TAG_LABEL + state, self.tag_bits)
        if self.scheme == "minimac":
            data = seq.to_bytes(8, "big") + b"".join(
                len(m).to_bytes(2, "big") + m
                for m in (self._payloads.get(q, b"") if q >= 0 else b"" for q in range(first, seq + 1))
            )
            return self.prf(self.key, data, self.tag_bits)
        # cumac / truncated: fragment fold of full-strength MACs
        t = self.tag_bits
        mask = (1 << t) - 1
        value = 0
        for a in range(self.n):
            q = seq - a
            if q < 0:
                continue
            sigma = self.prf(self.key, frame_record(MessageRecord(q, self._payloads[q])),
                             self.security_bits).value
            value ^= (sigma >> (self.security_bits - (a + 1) * t)) & mask
        return Bits(value, t)

    def receive(self, event) -> VerificationReport:
        received = self._admit(event)
        seq = event.seq
        report = VerificationReport(seq, received)
        if not received:
            self._retire(seq)
            return report
        if event.tag.length != self.tag_bits:
            raise ProtocolError("tag length mismatch")
        self._payloads[seq] = event.payload
        first = seq - self.n + 1
        covered = [q for q in range(max(0, first), seq + 1) if q not in self.lost]
        verifiable = all(q not in self.lost for q in range(max(0, first), seq + 1))
        if not verifiable:
            report.bits_lost = self.tag_bits
            if self.tag_verdicts is not None:
                self.tag_verdicts[seq] = "unverifiable-lost"
        else:
            ok = True if self.scheme == "window" else (self._expected_tag(seq) == event.tag)
            if ok:
                report.bits_matched = self.tag_bits
                for q in covered:
                    self.accrued[q] += self.tag_bits
                if self.tag_verdicts is not None:
                    self.tag_verdicts[seq] = "verified-ok"
            else:
                report.bits_mismatched = self.tag_bits
                newly = [q for q in covered if q not in self.suspect]
                self.suspect.update(newly)
                report.newly_suspected = tuple(newly)
                if self.tag_verdicts is not None:
                    self.tag_verdicts[seq] = "mismatch"
        self._retire(seq)
        return report
