"""Stochastic channel and attacker experiments.

Randomness uses PCG64 streams split per run index through SeedSequence
spawn keys, so every experiment is byte-reproducible from (seed, plan,
config) across platforms.

Two loss-accounting modes exist for channel experiments:

* "strict" replays the stream through the actual receiver ledger: a tag
  bit counts once its packet and all dependency packets arrived.
* "influence" marks a protection bit unusable when any packet within its
  dependency distances, in either direction, was lost. This symmetric
  influence-span reading matches the published loss measurements this
  harness reproduces, and is strictly more pessimistic than the ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .depsets import DependencyProfile, build_profile, uniform_profile, window_profile
from .maccore import Key
from .analysis import coverage_slot_count, drop_kill_masks
from .schemes import (
    CuMacSender,
    Loss,
    MiniMacSender,
    Packet,
    SpMacLedger,
    SpMacSender,
    TruncatedSender,
    WhipsSender,
    WindowLedger,
    window_depth,
)

__all__ = [
    "GilbertElliot",
    "LOW_ERROR",
    "HIGH_ERROR",
    "CHANNEL_PRESETS",
    "TrialPlan",
    "SchemeConfig",
    "ExperimentResult",
    "DEFAULT_PROFILE_SEED",
    "DEFAULT_KEY",
    "rng_for_run",
    "ge_stationary_per",
    "ge_loss_sequence",
    "ci_halfwidth",
    "run_channel_experiment",
    "run_endurance",
    "run_jammer_experiment",
    "run_predictor_experiment",
    "run_dos_comparison",
    "influence_unverifiable",
]


@dataclass(frozen=True)
class GilbertElliot:
    """Two-state Markov loss model: good/bad states with per-state drop
    probabilities; p switches good->bad, r switches bad->good."""

    p: float
    r: float
    err_good: float
    err_bad: float

    def __post_init__(self):
        for name in ("p", "r", "err_good", "err_bad"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")


LOW_ERROR = GilbertElliot(p=0.005, r=0.759, err_good=0.011, err_bad=0.624)
HIGH_ERROR = GilbertElliot(p=0.032, r=0.83, err_good=0.068, err_bad=0.788)
CHANNEL_PRESETS = {"low-error": LOW_ERROR, "high-error": HIGH_ERROR}

DEFAULT_PROFILE_SEED = bytes(range(16))
DEFAULT_KEY = Key(bytes(range(16, 32)))


def ge_stationary_per(model: GilbertElliot) -> float:
    """Long-run packet error rate of the two-state model."""
    if model.p + model.r == 0:
        raise ValueError("p + r = 0: stationary distribution undefined")
    pi_bad = model.p / (model.p + model.r)
    return pi_bad * model.err_bad + (1 - pi_bad) * model.err_good


def ge_loss_sequence(model: GilbertElliot, length: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean loss mask of `length` packets; starts in the good state.

    Per packet: sample the loss in the current state, then transition.
    """
    u = rng.random((2, length))
    mask = np.empty(length, dtype=bool)
    bad = False
    p, r, eg, eb = model.p, model.r, model.err_good, model.err_bad
    for i in range(length):
        mask[i] = u[0, i] < (eb if bad else eg)
        if bad:
            bad = u[1, i] >= r
        else:
            bad = u[1, i] < p
    return mask


def rng_for_run(seed: int, run: int) -> np.random.Generator:
    """Independent, reproducible PCG64 stream for one run index."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(run,))))


@dataclass(frozen=True)
class TrialPlan:
    runs: int = 30
    events_per_run: int = 1000
    confidence: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if self.runs < 2:
            raise ValueError("need at least 2 runs for a confidence interval")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must be in (0, 1)")


def ci_halfwidth(samples, confidence: float) -> float:
    """Student-t confidence half-width over run means."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least 2 samples")
    t = _scipy_stats.t.ppf((1 + confidence) / 2, df=arr.size - 1)
    return float(t * arr.std(ddof=1) / math.sqrt(arr.size))


@dataclass(frozen=True)
class ExperimentResult:
    mean: float
    ci: float
    per_run: tuple[float, ...]


@dataclass(frozen=True)
class SchemeConfig:
    """Everything needed to instantiate one scheme under test."""

    scheme: str
    tag_bits: int
    security_bits: int = 128
    g: int = 1
    immediate_bits: int = 0
    pool_size: int = 64
    profile_seed: bytes = DEFAULT_PROFILE_SEED

    def profile(self) -> DependencyProfile:
        """Dependency structure driving loss accounting for this config."""
        if self.scheme == "spmac":
            return build_profile(self.tag_bits, self.security_bits, self.g,
                                 self.immediate_bits, self.pool_size, self.profile_seed)
        if self.scheme == "truncated":
            return uniform_profile(self.tag_bits, self.tag_bits, (0,))
        return window_profile(self.tag_bits, self.security_bits)

    def make_sender(self, key: Key):
        if self.scheme == "spmac":
            return SpMacSender(key, self.profile())
        cls = {"whips": WhipsSender, "cumac": CuMacSender,
               "minimac": MiniMacSender, "truncated": TruncatedSender,
               "window": CuMacSender}[self.scheme]
        return cls(key, self.tag_bits, self.security_bits)

    def make_ledger(self, key: Key, keep_history: bool = False):
        if self.scheme == "spmac":
            return SpMacLedger(key, self.profile(), keep_history=keep_history)
        return WindowLedger(key, self.scheme, self.tag_bits, self.security_bits,
                            keep_history=keep_history)

    def lookahead(self) -> int:
        if self.scheme == "spmac":
            return self.profile().max_delay + 1
        if self.scheme == "truncated":
            return 1
        return window_depth("whips" if self.scheme == "whips" else "cumac",
                            self.tag_bits, self.security_bits)


def _strict_zero_fraction(config: SchemeConfig, mask: np.ndarray, events: int) -> float:
    """Ledger replay: fraction of received target messages finishing at
    zero accrued security. The stream extends one horizon beyond the
    targets so every target retires through normal retention."""
    key = DEFAULT_KEY
    sender = config.make_sender(key)
    ledger = config.make_ledger(key)
    for seq in range(events + ledger.horizon):
        pkt = sender.sign(b"")
        ledger.receive(Loss(seq) if mask[seq] else pkt)
    st = ledger.stats
    if st.finalized == 0:
        return 0.0
    return st.zero_accrued / st.finalized


def influence_unverifiable(profile: DependencyProfile, mask: np.ndarray, events: int) -> tuple[int, int]:
    """(zeroed, received) counts under influence-span accounting.

    A protection bit of message i at (tag offset d, bit j) is unusable iff
    some packet at distance of a dependency from the tag position, in
    either direction, was lost. Positions outside the stream count as
    delivered.
    """
    # zero-vs-nonzero only depends on the distinct dependency sets
    deps = list(dict.fromkeys(d.marks for d in profile.bit_deps))
    length = len(mask)
    zeroed = received = 0
    lost = mask
    for i in range(events):
        if lost[i]:
            continue
        received += 1
        alive = False
        for marks in deps:
            for d in marks:
                td = i + d
                ok = True
                for dd in marks:
                    lo = td - dd
                    hi = td + dd
                    if (0 <= lo < length and lost[lo]) or (hi < length and lost[hi]):
                        ok = False
                        break
                if ok:
                    alive = True
                    break
            if alive:
                break
        if not alive:
            zeroed += 1
    return zeroed, received


def run_channel_experiment(config: SchemeConfig, model: GilbertElliot,
                           plan: TrialPlan, accounting: str = "influence") -> ExperimentResult:
    """Fraction of received messages with no usable integrity protection
    after streaming through the lossy channel."""
    if accounting not in ("strict", "influence"):
        raise ValueError("accounting must be 'strict' or 'influence'")
    profile = config.profile() if accounting == "influence" else None
    fractions = []
    for run in range(plan.runs):
        rng = rng_for_run(plan.seed, run)
        if accounting == "strict":
            lookahead = config.lookahead()
            mask = ge_loss_sequence(model, plan.events_per_run + lookahead, rng)
            fractions.append(_strict_zero_fraction(config, mask, plan.events_per_run))
        else:
            span = 2 * profile.max_delay
            mask = ge_loss_sequence(model, plan.events_per_run + span, rng)
            zeroed, received = influence_unverifiable(profile, mask, plan.events_per_run)
            fractions.append(zeroed / received if received else 0.0)
    return ExperimentResult(float(np.mean(fractions)), ci_halfwidth(fractions, plan.confidence),
                            tuple(fractions))


def run_endurance(config: SchemeConfig, model: GilbertElliot, packets: int,
                  seed: int = 0) -> dict:
    """Single long ledger replay; returns the ledger statistics as a dict.

    Only messages finalized through normal retention are counted, so the
    truncated coverage of end-of-stream messages cannot masquerade as a
    protection failure.
    """
    rng = rng_for_run(seed, 0)
    mask = ge_loss_sequence(model, packets, rng)
    key = DEFAULT_KEY
    sender = config.make_sender(key)
    ledger = config.make_ledger(key)
    for seq in range(packets):
        pkt = sender.sign(b"")
        ledger.receive(Loss(seq) if mask[seq] else pkt)
    st = ledger.stats
    return {
        "packets": packets,
        "received": st.received,
        "lost": st.lost,
        "finalized": st.finalized,
        "zero_accrued": st.zero_accrued,
        "min_accrued": st.min_accrued,
        "empirical_per": st.lost / packets,
    }


def run_jammer_experiment(config: SchemeConfig, q: float, plan: TrialPlan) -> ExperimentResult:
    """Selective-jammer success rate against a fixed target message.

    The attacker attempts to jam every packet whose loss can reduce the
    target's security (the kill-mask offsets), each attempt succeeding
    independently with probability q; success means the target retains
    zero verifiable protection.
    """
    profile = config.profile()
    masks = [m for _, m in sorted(drop_kill_masks(profile).items())]
    full = (1 << coverage_slot_count(profile)) - 1
    can_zero = 0
    for m in masks:
        can_zero |= m
    # split the <=128-bit slot masks into two uint64 lanes for vector ORs
    lane = (1 << 64) - 1
    lo = np.array([m & lane for m in masks], dtype=np.uint64)
    hi = np.array([m >> 64 for m in masks], dtype=np.uint64)
    full_lo, full_hi = np.uint64(full & lane), np.uint64(full >> 64)
    rates = []
    for run in range(plan.runs):
        rng = rng_for_run(plan.seed, run)
        if can_zero != full:  # immediate bits: unjammable baseline remains
            rates.append(0.0)
            continue
        hits = rng.random((plan.events_per_run, len(masks))) < q
        u_lo = np.bitwise_or.reduce(np.where(hits, lo, np.uint64(0)), axis=1)
        u_hi = np.bitwise_or.reduce(np.where(hits, hi, np.uint64(0)), axis=1)
        wins = int(((u_lo == full_lo) & (u_hi == full_hi)).sum())
        rates.append(wins / plan.events_per_run)
    return ExperimentResult(float(np.mean(rates)), ci_halfwidth(rates, plan.confidence),
                            tuple(rates))


def _observation_flip(model: GilbertElliot, alpha: float) -> float:
    """Symmetric observation noise such that P(bad | called bad) = alpha."""
    pi_b = model.p / (model.p + model.r)
    pi_g = 1 - pi_b
    denom = alpha * pi_g + (1 - alpha) * pi_b
    if denom == 0:
        return 0.0
    return (1 - alpha) * pi_b / denom


def run_predictor_experiment(config: SchemeConfig, model: GilbertElliot,
                             alpha: float, plan: TrialPlan) -> ExperimentResult:
    """Channel-predicting injector: after calling the channel bad, the
    attacker waits one transmission and injects a forgery; the attack
    succeeds iff the window ending with and the window starting with the
    forged message each contain at least one genuine loss."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    n = window_depth("whips" if config.scheme == "whips" else "cumac",
                     config.tag_bits, config.security_bits) \
        if config.scheme != "spmac" else config.profile().max_delay + 1
    eps = _observation_flip(model, alpha)
    scan_cap = 2000
    rates = []
    p, r, eg, eb = model.p, model.r, model.err_good, model.err_bad
    for run in range(plan.runs):
        rng = rng_for_run(plan.seed, run)
        wins = 0
        bad = False
        # rolling window of the last n-1 losses before the cursor
        recent: list[bool] = []

        def step() -> bool:
            nonlocal bad
            loss = rng.random() < (eb if bad else eg)
            if bad:
                bad = rng.random() >= r
            else:
                bad = rng.random() < p
            recent.append(loss)
            if len(recent) > n - 1:
                del recent[0]
            return loss

        for _ in range(64):  # burn-in towards the stationary distribution
            step()
        for _ in range(plan.events_per_run):
            injected = False
            for _ in range(scan_cap):
                observed_bad = bad if rng.random() >= eps else not bad
                step()
                if observed_bad:
                    # waited one transmission (the step above); inject now
                    left = any(recent)
                    after = [step() for _ in range(n - 1)]
                    wins += left and any(after)
                    injected = True
                    break
            if not injected:
                pass  # no opportunity found: counts as failure
        rates.append(wins / plan.events_per_run)
    return ExperimentResult(float(np.mean(rates)), ci_halfwidth(rates, plan.confidence),
                            tuple(rates))


DOS_STREAM = 160
DOS_BATCH = 8
DOS_THRESHOLD = 32
_DOS_EXACT_BUDGET = 50_000


def _profile_kill_tensor(profile: DependencyProfile, n_msgs: int) -> np.ndarray:
    """kill[p, m, s]: dropping packet p makes coverage slot s of message m
    unverifiable. The stream is an excerpt: packets before and after it
    are treated as delivered, so only in-stream drops matter."""
    slots = [(j, d) for j, dep in enumerate(profile.bit_deps) for d in dep.marks]
    kill = np.zeros((n_msgs, n_msgs, len(slots)), dtype=bool)
    for s, (j, d) in enumerate(slots):
        marks = profile.bit_deps[j].marks
        for m in range(n_msgs):
            tag_at = m + d
            for dd in marks:
                p = tag_at - dd
                if 0 <= p < n_msgs and p != m:
                    kill[p, m, s] = True
    return kill


def _dos_evaluator(scheme: str, n_msgs: int, profile: DependencyProfile | None):
    """Returns discards(drop_tuple) -> int for one scheme."""
    if scheme == "traditional":
        return lambda drops: 0
    if scheme in ("aggregated", "shifted-xor"):
        # one tag per batch, carried by the last member: the whole batch
        # verifies or nothing does (the rotation offsets of the shifted
        # variant do not change which packets are required)
        def discards(drops):
            dead_batches = {p // DOS_BATCH for p in drops}
            total = 0
            for b in dead_batches:
                members = min((b + 1) * DOS_BATCH, n_msgs) - b * DOS_BATCH
                total += members - sum(1 for p in drops if p // DOS_BATCH == b)
            return total
        return discards
    kill = _profile_kill_tensor(profile, n_msgs)
    total_slots = kill.shape[2]
    base = total_slots  # undropped stream: every slot verifiable

    def discards(drops):
        if not drops:
            return 0
        dead = np.zeros((n_msgs, total_slots), dtype=bool)
        for p in drops:
            dead |= kill[p]
        accrued = base - dead.sum(axis=1)
        below = accrued < DOS_THRESHOLD
        below[list(drops)] = False  # dropped packets are not received
        return int(below.sum())
    return discards


def _dos_best_drops(discards, k: int, n_msgs: int) -> tuple[int, tuple[int, ...]]:
    """Adversarial drop placement maximizing discards.

    Exhaustive when the combination count fits the budget, greedy beyond;
    greedy ties break on the lowest position. Greedy can only understate
    the attacker, so reported discards are a lower bound there.
    """
    if k == 0:
        return 0, ()
    if math.comb(n_msgs, k) <= _DOS_EXACT_BUDGET:
        from itertools import combinations
        best, best_set = -1, ()
        for combo in combinations(range(n_msgs), k):
            d = discards(combo)
            if d > best:
                best, best_set = d, combo
        return best, best_set
    chosen: list[int] = []
    for _ in range(k):
        current = discards(tuple(chosen))
        best_gain, best_p = -1, None
        for p in range(n_msgs):
            if p in chosen:
                continue
            gain = discards(tuple(chosen) + (p,)) - current
            if gain > best_gain:
                best_gain, best_p = gain, p
        chosen.append(best_p)
    return discards(tuple(chosen)), tuple(sorted(chosen))


def run_dos_comparison(k_drops: int, schemes=("traditional", "aggregated", "shifted-xor",
                                              "window", "spmac"),
                       n_msgs: int = DOS_STREAM,
                       spmac_config: SchemeConfig | None = None) -> dict[str, int]:
    """Received messages pushed below the discard threshold by an optimal
    k-drop attacker, per scheme. Deterministic."""
    if spmac_config is None:
        spmac_config = SchemeConfig("spmac", tag_bits=16, g=1)
    out = {}
    for scheme in schemes:
        profile = None
        if scheme == "window":
            profile = window_profile(16, 128)
        elif scheme == "spmac":
            profile = spmac_config.profile()
        evaluator = _dos_evaluator(scheme, n_msgs, profile)
        discards, _ = _dos_best_drops(evaluator, k_drops, n_msgs)
        out[scheme] = discards
    return out
