"""Closed-form and exhaustive analytics over dependency structures.

Everything here works on dependency profiles: sliding-window and
truncated schemes are expressed as uniform profiles, so a single
kill-mask representation covers all constructions. A message's protection
is a set of coverage slots, one per (tag bit, dependency offset); a drop
at relative offset p knocks out exactly the slots whose difference to p is
itself a dependency, which is what makes the difference-multiplicity bound
of the mark sets an upper bound on per-drop damage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .depsets import (
    DependencyProfile,
    pool_length_bounds,
    sidon_pool,
)
from .schemes import window_depth

__all__ = [
    "ResilienceQuery",
    "delay_curve",
    "delay_envelope",
    "coverage_slot_count",
    "drop_kill_masks",
    "covering_tags_lost",
    "exact_min_security",
    "greedy_min_security",
    "worst_case_resilience",
    "memory_model",
    "jam_success_probability",
    "operation_count",
    "OpCount",
]


def delay_curve(profile: DependencyProfile, horizon: int | None = None) -> list[int]:
    """Verified bits of one message after k further packets, lossless channel.

    entry[k] counts the dependency offsets <= k across all tag bits; the
    curve is non-decreasing and reaches security_bits at the profile's max
    delay.
    """
    if horizon is None:
        horizon = profile.max_delay
    curve = [0] * (horizon + 1)
    for dep in profile.bit_deps:
        for d in dep.marks:
            if d <= horizon:
                curve[d] += 1
    total = 0
    for k in range(horizon + 1):
        total += curve[k]
        curve[k] = total
    return curve


def delay_envelope(tag_bits: int, security_bits: int, g: int, immediate_bits: int,
                   pool_size: int, horizon: int) -> tuple[list[int], list[int]]:
    """Pointwise (min, max) delay curves over all admissible pool selections.

    At each k the best selection takes the per-class sets with the most
    dependencies <= k, the worst takes the fewest; both respect
    distinctness within each order class.
    """
    progressive = tag_bits - immediate_bits
    prog_security = security_bits - immediate_bits
    if progressive == 0:
        flat = [immediate_bits] * (horizon + 1)
        return flat, list(flat)
    base = prog_security // progressive
    rem = prog_security % progressive
    classes = []
    if rem:
        classes.append((base + 1, rem))
    classes.append((base, progressive - rem))
    lo = [immediate_bits] * (horizon + 1)
    hi = [immediate_bits] * (horizon + 1)
    for order, count in classes:
        if count == 0:
            continue
        pool = sidon_pool(order, g, pool_size)
        per_set = []
        for s in pool:
            counts = [0] * (horizon + 1)
            for d in s.marks:
                if d <= horizon:
                    counts[d] += 1
            total = 0
            for k in range(horizon + 1):
                total += counts[k]
                counts[k] = total
            per_set.append(counts)
        for k in range(horizon + 1):
            vals = sorted(c[k] for c in per_set)
            lo[k] += sum(vals[:count])
            hi[k] += sum(vals[-count:])
    return lo, hi


def coverage_slot_count(profile: DependencyProfile) -> int:
    """Total coverage slots per message; equals security_bits by construction."""
    return sum(d.order for d in profile.bit_deps)


def drop_kill_masks(profile: DependencyProfile) -> dict[int, int]:
    """For each drop offset p != 0 relative to a target message, the bitmask
    of coverage slots the drop makes unverifiable.

    Slot (j, d) dies iff (d - p) is itself a dependency of bit j: p == d
    (the tag's packet) is covered because 0 is always a dependency.
    """
    slots = []
    for j, dep in enumerate(profile.bit_deps):
        for d in dep.marks:
            slots.append((j, d))
    masks: dict[int, int] = {}
    for idx, (j, d) in enumerate(slots):
        dep = profile.bit_deps[j]
        for delta in dep.marks:
            p = d - delta
            if p == 0:
                continue
            masks[p] = masks.get(p, 0) | (1 << idx)
        # a drop after the tag cannot hurt it; p ranges over d - D_j only
    return masks


def covering_tags_lost(marks, drop_offset: int) -> int:
    """How many of a message's covering tags one drop invalidates, for a
    single shared dependency set. Zero for the message's own offset."""
    if drop_offset == 0:
        return 0
    ms = tuple(marks)
    sset = set(ms)
    return sum(1 for d in ms if (d - drop_offset) in sset)


def _prepare_masks(profile: DependencyProfile) -> list[tuple[int, int]]:
    """(offset, mask) pairs, deduplicated and dominance-pruned for max kill."""
    raw = sorted(drop_kill_masks(profile).items())
    seen = set()
    unique = []
    for p, m in raw:
        if m and m not in seen:
            seen.add(m)
            unique.append((p, m))
    # discard masks strictly contained in another (never help a max union)
    keep = []
    for p, m in unique:
        if not any(m != m2 and (m | m2) == m2 for _, m2 in unique):
            keep.append((p, m))
    return keep


def exact_min_security(profile: DependencyProfile, k: int) -> int:
    """Exhaustive minimum accrued security after k adversarial drops."""
    total = coverage_slot_count(profile)
    if k == 0:
        return total
    cand = _prepare_masks(profile)
    cand.sort(key=lambda pm: -bin(pm[1]).count("1"))
    masks = [m for _, m in cand]
    pops = [bin(m).count("1") for m in masks]
    # window_sum[i][r]: best-possible popcount of r masks taken from i onward
    best = 0

    def rec(start: int, depth: int, union: int, covered: int):
        nonlocal best
        if covered > best:
            best = covered
        remaining = k - depth
        if remaining == 0 or start >= len(masks):
            return
        for i in range(start, len(masks)):
            # masks are popcount-sorted: once even disjoint picks cannot
            # beat the incumbent, every later branch is hopeless
            if covered + sum(pops[i:i + remaining]) <= best:
                break
            u = union | masks[i]
            rec(i + 1, depth + 1, u, bin(u).count("1"))

    rec(0, 0, 0, 0)
    return total - best


def greedy_min_security(profile: DependencyProfile, k: int) -> int:
    """Greedy adversary: repeatedly drop the packet killing the most
    still-alive slots, lowest offset first on ties. Never below the exact
    optimum's damage, so the result upper-bounds remaining security."""
    total = coverage_slot_count(profile)
    cand = sorted(drop_kill_masks(profile).items())
    union = 0
    for _ in range(k):
        best_gain, best_mask = -1, 0
        for p, m in cand:
            gain = bin(m & ~union).count("1")
            if gain > best_gain:
                best_gain, best_mask = gain, m
        union |= best_mask
    return total - bin(union).count("1")


@dataclass(frozen=True)
class ResilienceQuery:
    """Adversarial-drop question: minimum security of any message after
    `drops` targeted losses placed anywhere in the horizon around it."""

    profile: DependencyProfile
    drops: int
    horizon: int | None = None
    attacker_knows_profile: bool = True

    def __post_init__(self):
        need = 2 * self.profile.max_delay + 1
        if self.horizon is not None and self.horizon < need:
            raise ValueError(f"horizon must be at least {need}")
        if self.drops < 0:
            raise ValueError("drops must be non-negative")


EXACT_DROP_LIMIT = 4


def worst_case_resilience(query: ResilienceQuery) -> int:
    """Minimum accrued bit security over all drop placements.

    Exact exhaustive search up to EXACT_DROP_LIMIT drops, greedy beyond;
    the worst case assumes the attacker knows the bit dependencies
    (drops outside +-max_delay of the target cannot touch any covering
    slot, so the search space is exactly the kill-mask offsets).
    """
    if query.drops <= EXACT_DROP_LIMIT:
        return exact_min_security(query.profile, query.drops)
    return greedy_min_security(query.profile, query.drops)


def memory_model(scheme: str, tag_bits: int, security_bits: int = 128,
                 msg_len: int | None = None, profile: DependencyProfile | None = None,
                 pool_size: int = 64) -> tuple[int, int]:
    """Per-stream sender state in bytes, as a (min, max) range.

    Deterministic schemes return a degenerate range. The staggered scheme
    depends on which sets were drawn, so without a concrete profile the
    range spans the best and worst admissible pool selection; pool length
    estimates stand in where pool construction is impractical.
    """
    if scheme == "whips":
        v = math.ceil(security_bits / tag_bits) * 32
        return v, v
    if scheme == "cumac":
        window_depth("cumac", tag_bits, security_bits)
        v = security_bits // 8
        return v, v
    if scheme == "minimac":
        if msg_len is None:
            raise ValueError("minimac memory depends on msg_len")
        v = window_depth("minimac", tag_bits, security_bits) * msg_len
        return v, v
    if scheme == "truncated":
        return 0, 0
    if scheme != "spmac":
        raise ValueError(f"unknown scheme {scheme!r}")

    if tag_bits > security_bits:
        raise ValueError("tag longer than the underlying MAC")
    slot_bytes = 2 * math.ceil(tag_bits / 8)  # accumulator + fill mask
    if profile is not None:
        v = (profile.max_delay + 1) * slot_bytes
        return v, v
    # worst-case-memory parameterization: per-drop loss capped at one
    # tag's worth, i.e. unique differences (longest rulers)
    base = security_bits // tag_bits
    rem = security_bits % tag_bits
    classes = [(base + 1, rem), (base, tag_bits - rem)]
    lo_delay = hi_delay = 0
    for order, count in classes:
        if count == 0 or order == 1:
            continue
        shortest, longest = pool_length_bounds(order, 1, pool_size)
        lo_delay = max(lo_delay, shortest)
        hi_delay = max(hi_delay, longest)
    return (lo_delay + 1) * slot_bytes, (hi_delay + 1) * slot_bytes


def jam_success_probability(config, q: float) -> float:
    """Probability that independent jams (success prob q each, one attempt
    per packet within the influence span) zero a fixed target's security.

    Window schemes admit the closed summation over nearest-hit pairs: the
    attack succeeds iff the nearest left hit at distance a and nearest
    right hit at distance b satisfy a + b <= n. Profiles with immediate
    bits can never be zeroed. Other profiles fall back to exhaustive
    summation over jam outcomes when the relevant-offset count permits.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must be a probability")
    if isinstance(config, int):
        n = config
        total = 0.0
        for a in range(1, n):
            for b in range(1, min(n - a, n - 1) + 1):
                total += q * q * (1 - q) ** (a + b - 2)
        return min(1.0, total)
    profile: DependencyProfile = config
    if profile.immediate_bits > 0:
        return 0.0
    masks = sorted(drop_kill_masks(profile).items())
    full = (1 << coverage_slot_count(profile)) - 1
    m = len(masks)
    if m > 22:
        raise ValueError(
            f"{m} relevant positions: exhaustive summation infeasible, use Monte Carlo"
        )
    total = 0.0
    for pattern in range(1 << m):
        union = 0
        prob = 1.0
        for i in range(m):
            if pattern >> i & 1:
                union |= masks[i][1]
                prob *= q
            else:
                prob *= 1 - q
        if union == full:
            total += prob
    return total


@dataclass(frozen=True)
class OpCount:
    """Per-sign cost model: PRF invocations, bytes hashed, tag-wide XOR folds."""

    mac_calls: int
    hashed_bytes: int
    xor_words: int


def operation_count(scheme: str, tag_bits: int, msg_len: int,
                    security_bits: int = 128) -> OpCount:
    """Structural per-sign cost of each construction (replaces wall-clock
    timing with operation counts)."""
    framed = 8 + msg_len
    if scheme == "truncated":
        return OpCount(1, framed, 0)
    if scheme == "cumac":
        n = window_depth("cumac", tag_bits, security_bits)
        return OpCount(1, framed, n)
    if scheme == "spmac":
        return OpCount(1, framed, math.ceil(security_bits / tag_bits))
    if scheme == "whips":
        n = window_depth("whips", tag_bits, security_bits)
        return OpCount(2, (1 + msg_len) + (1 + 8 + 32 * n), 0)
    if scheme == "minimac":
        n = window_depth("minimac", tag_bits, security_bits)
        return OpCount(1, 8 + n * (2 + msg_len), 0)
    raise ValueError(f"unknown scheme {scheme!r}")
