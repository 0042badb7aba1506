"""Acceptance suite: every exit criterion at its stated tolerance.

Each test prints one `[criterion NN] PASS/FAIL` line (run with -s or rely
on pytest's captured output for failures).
"""

import math
import time

import pytest

from promaclab.analysis import (
    ResilienceQuery,
    exact_min_security,
    greedy_min_security,
    jam_success_probability,
    worst_case_resilience,
)
from promaclab.depsets import (
    build_profile,
    is_g_sidon,
    profile_max_delay,
    search_shortest_sets,
    sidon_pool,
    uniform_profile,
    window_profile,
)
from promaclab.maccore import Bits, Key, MessageRecord, base_mac, keyed_mac
from promaclab.schemes import (
    CuMacSender,
    SpMacSender,
    WhipsSender,
    transform_transcript,
)
from promaclab.analysis import memory_model
from promaclab.simkit import (
    HIGH_ERROR,
    LOW_ERROR,
    SchemeConfig,
    TrialPlan,
    ge_loss_sequence,
    ge_stationary_per,
    rng_for_run,
    run_channel_experiment,
    run_dos_comparison,
    run_endurance,
    run_jammer_experiment,
)
from conftest import CountingPrf

KEY = Key(bytes(range(16)))
SEED16 = bytes(range(16))


def report(num, desc, ok, detail):
    line = f"[criterion {num}] {'PASS' if ok else 'FAIL'}: {desc} — {detail}"
    print(line)
    assert ok, line


def test_c01_shortest_ruler_search():
    t0 = time.time()
    found = search_shortest_sets(4, 1, 1)
    elapsed = time.time() - t0
    ok = found[0].length == 6 and is_g_sidon((0, 1, 4, 6), 1) and elapsed < 1.0
    report(1, "order-4 search returns length 6 and {0,1,4,6} validates", ok,
           f"length={found[0].length}, {elapsed:.3f}s")


def test_c02_order16_delays():
    g1 = uniform_profile(8, 128, search_shortest_sets(16, 1, 1)[0].marks)
    g4 = uniform_profile(8, 128, search_shortest_sets(16, 4, 1)[0].marks)
    d1, d4 = profile_max_delay(g1), profile_max_delay(g4)
    report(2, "order-16 profiles: max delay 177 at g=1 and 43 at g=4",
           d1 == 177 and d4 == 43, f"got {d1} and {d4}")


def test_c03_single_drop_damage_bound():
    t0 = time.time()
    violations = 0
    checked = 0
    for order, g in ((4, 1), (7, 1), (8, 1), (7, 2), (8, 2)):
        for s in sidon_pool(order, g, 64):
            sset = set(s.marks)
            for offset in range(-s.length, s.length + 1):
                if offset == 0:
                    continue
                checked += 1
                if sum(1 for d in s.marks if (d - offset) in sset) > g:
                    violations += 1
    elapsed = time.time() - t0
    report(3, "single drop never invalidates more than g covering tags "
              "(all pool sets of order <= 8)",
           violations == 0 and elapsed < 60,
           f"{checked} (set, drop) pairs, {violations} violations, {elapsed:.1f}s")


def test_c04_incremental_vs_bruteforce():
    import random
    configs = [
        (8, 4, 0, b"\x00" * 16), (8, 4, 0, b"\x01" * 16),
        (16, 2, 0, b"\x02" * 16), (16, 2, 0, b"\x03" * 16),
        (32, 1, 0, b"\x04" * 16), (32, 1, 0, b"\x05" * 16),
        (32, 2, 16, b"\x06" * 16), (32, 1, 16, b"\x07" * 16),
        (24, 2, 0, b"\x08" * 16), (16, 1, 0, b"\x09" * 16),
    ]
    packets = 10_000
    mismatches = 0
    rng = random.Random(1234)
    for tag_bits, g, imm, seed in configs:
        profile = build_profile(tag_bits, 128, g, imm, 64, seed)
        sender = SpMacSender(KEY, profile)
        payloads = [bytes(rng.randrange(256) for _ in range(8)) for _ in range(packets)]
        tags = [sender.sign(p).tag for p in payloads]
        sigmas = [base_mac(KEY, MessageRecord(i, p)) for i, p in enumerate(payloads)]
        expect = transform_transcript(sigmas, profile)
        mismatches += sum(a != b for a, b in zip(tags, expect))
    report(4, "incremental staggered signing equals from-scratch recomputation "
              "(10 profiles x 10^4 packets)",
           mismatches == 0, f"{mismatches} mismatching tags")


def test_c05_fragment_scheme_equivalence():
    mismatches = 0
    for tag_bits in (8, 16, 32):
        a = SpMacSender(KEY, window_profile(tag_bits, 128))
        b = CuMacSender(KEY, tag_bits)
        for i in range(2000):
            payload = i.to_bytes(4, "big")
            mismatches += a.sign(payload).tag != b.sign(payload).tag
    report(5, "fragment aggregation equals the staggered scheme under the "
              "degenerate window profile", mismatches == 0, f"{mismatches} mismatches")


def test_c06_sandwich_and_loss_bounds():
    window_zero = all(
        worst_case_resilience(ResilienceQuery(window_profile(t, 128), 2)) == 0
        for t in (8, 16, 32)
    )
    bounds_ok = True
    details = []
    for tag_bits, g, imm in ((8, 4, 0), (16, 2, 0), (32, 1, 0), (32, 2, 16)):
        prof = build_profile(tag_bits, 128, g, imm, 64, SEED16)
        for k in range(5):
            sec = exact_min_security(prof, k)
            if sec < 128 - 32 * k or (imm and sec < imm):
                bounds_ok = False
                details.append(f"{tag_bits}b k={k}: {sec}")
    imm_prof = build_profile(32, 128, 2, 16, 64, SEED16)
    never_zero = (exact_min_security(imm_prof, 4) >= 16
                  and greedy_min_security(imm_prof, 40) >= 16)
    report(6, "2 drops zero window schemes; staggered 32-bit-loss profiles "
              "keep >= 128-32k (exhaustive k<=4); immediate bits never zero",
           window_zero and bounds_ok and never_zero,
           f"window_zero={window_zero}, violations={details or 'none'}, "
           f"immediate_floor_ok={never_zero}")


def test_c07_memory_endpoints():
    whips64 = memory_model("whips", 64)[0]
    whips10 = memory_model("whips", 10)[0]
    mini_lo = memory_model("minimac", 32, msg_len=10)[0]
    mini_hi = memory_model("minimac", 32, msg_len=50)[0]
    ok = (whips64, whips10, mini_lo, mini_hi) == (64, 416, 40, 200)
    report(7, "memory endpoints: substate chain 64 B / 416 B, history hash 40-200 B",
           ok, f"got {(whips64, whips10, mini_lo, mini_hi)}")


def test_c08_channel_model_rates():
    ok = True
    details = []
    for name, model, want in (("low", LOW_ERROR, 0.0150), ("high", HIGH_ERROR, 0.0947)):
        analytic = ge_stationary_per(model)
        if abs(analytic - want) > 2e-4:
            ok = False
        n = 1_000_000
        mask = ge_loss_sequence(model, n, rng_for_run(0, 0))
        per = ge_stationary_per(model)
        pi_b = model.p / (model.p + model.r)
        lam = 1 - model.p - model.r
        var = per * (1 - per) + 2 * pi_b * (1 - pi_b) * (model.err_bad - model.err_good) ** 2 * lam / (1 - lam)
        sigma = math.sqrt(var / n)
        dev = abs(mask.mean() - per)
        if dev > 3 * sigma:
            ok = False
        details.append(f"{name}: analytic {analytic:.4f} (want {want}), "
                       f"empirical dev {dev:.5f} vs 3σ={3 * sigma:.5f}")
    report(8, "loss-model rates: 1.50%/9.47% analytic, 10^6-packet empirical within 3σ",
           ok, "; ".join(details))


PLAN = TrialPlan(runs=30, events_per_run=1000, confidence=0.99, seed=0)


def test_c09a_window_one_byte_high_error():
    res = run_channel_experiment(SchemeConfig("window", 8), HIGH_ERROR, PLAN,
                                 accounting="influence")
    strict = run_channel_experiment(SchemeConfig("window", 8), HIGH_ERROR, PLAN,
                                    accounting="strict")
    ok = abs(res.mean - 0.731) <= 0.02
    report("9a", "window scheme, 1-byte tags, high-error channel: "
                 "unverifiable fraction 73.1% ± 2pp",
           ok, f"influence {res.mean:.4f} ± {res.ci:.4f}, strict ledger {strict.mean:.4f}")


def test_c09b_window_four_byte_low_error():
    res = run_channel_experiment(SchemeConfig("window", 32), LOW_ERROR, PLAN,
                                 accounting="influence")
    ok = abs(res.mean - 0.006) <= 0.003
    report("9b", "window scheme, 4-byte tags, low-error channel: "
                 "unverifiable fraction 0.6% ± 0.3pp",
           ok, f"influence {res.mean:.4f} ± {res.ci:.4f}")


def test_c09c_staggered_one_byte_high_error():
    cfg = SchemeConfig("spmac", 8, g=4, profile_seed=SEED16)
    res = run_channel_experiment(cfg, HIGH_ERROR, PLAN, accounting="influence")
    ok = abs(res.mean - 0.10) <= 0.02
    report("9c", "randomized 1-byte profile, high-error channel: "
                 "unverifiable fraction 10% ± 2pp",
           ok, f"influence {res.mean:.4f} ± {res.ci:.4f}")


def test_c10_jammer_analytic_vs_monte_carlo():
    plan = TrialPlan(runs=30, events_per_run=1000, confidence=0.99, seed=2)
    ok = True
    details = []
    for tag_bits in (8, 32):
        n = 128 // tag_bits
        for q in (0.5, 0.9, 0.976, 0.999):
            analytic = jam_success_probability(n, q)
            mc = run_jammer_experiment(SchemeConfig("window", tag_bits), q, plan)
            if abs(mc.mean - analytic) > mc.ci + 1e-6:
                ok = False
                details.append(f"t={tag_bits} q={q}: |{mc.mean:.5f}-{analytic:.5f}| > {mc.ci:.5f}")
            if q >= 0.976 and (analytic <= 0.999 or mc.mean <= 0.999):
                ok = False
                details.append(f"t={tag_bits} q={q}: success not > 99.9%")
    report(10, "jammer: analytic matches Monte Carlo within the 99% CI; "
               "q >= 0.976 exceeds 99.9% on window schemes",
           ok, "; ".join(details) or "all q in {0.5, 0.9, 0.976, 0.999} agree")


def test_c11_low_error_endurance():
    cfg = SchemeConfig("spmac", 8, g=4, profile_seed=SEED16)
    stats = run_endurance(cfg, LOW_ERROR, 1_000_000, seed=0)
    ok = stats["zero_accrued"] == 0 and stats["finalized"] > 900_000
    report(11, "1-byte randomized profile over 10^6 packets at ~1.5% loss: "
               "no received message ends with zero verified protection",
           ok, f"finalized {stats['finalized']}, zero-accrued {stats['zero_accrued']}, "
               f"min accrued {stats['min_accrued']}")


def test_c12_dos_comparison():
    res = run_dos_comparison(8)
    ok = (res["traditional"] == 0
          and res["spmac"] * 2 < res["aggregated"]
          and res["aggregated"] == 56)
    report(12, "8 adversarial drops: staggered scheme discards less than half "
               "of batch aggregation", ok, str(res))


def test_c13_operation_count_contract():
    counting = CountingPrf(keyed_mac)
    prof = build_profile(32, 128, 1, 0, 64, SEED16)
    sender = SpMacSender(KEY, prof, prf=counting)
    sender.sign(b"warmup")
    sender.preprocess()
    calls, online, pre = counting.calls, sender.online_folds, sender.preprocess_folds
    sender.sign(b"measured")
    spmac_ok = (counting.calls - calls == 1
                and sender.online_folds - online == 1
                and sender.preprocess_folds == pre)

    counting2 = CountingPrf(keyed_mac)
    whips = WhipsSender(KEY, 16, prf=counting2)
    whips.sign(b"warmup")
    before = counting2.calls
    whips.sign(b"measured")
    whips_ok = counting2.calls - before == 2
    report(13, "per-sign cost: staggered = 1 MAC call + 1 online fold "
               "(others preprocessed); substate chain = 2 MAC calls",
           spmac_ok and whips_ok,
           f"staggered Δcalls/Δonline/Δpre = "
           f"{counting.calls - calls}/{sender.online_folds - online}/"
           f"{sender.preprocess_folds - pre}, chain Δcalls = {counting2.calls - before}")
