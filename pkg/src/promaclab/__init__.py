"""Progressive message authentication laboratory.

Short authentication tags whose protection accrues over subsequent
packets: a staggered per-bit XOR construction driven by randomized
ruler-based dependencies, the sliding-window schemes it supersedes, and
the analytics and channel/attacker simulations to compare them.
"""

from .maccore import Bits, Key, MessageRecord, base_mac, fragment_bit, keyed_mac
from .depsets import (
    DependencyProfile,
    MarkSet,
    build_profile,
    is_g_sidon,
    is_golomb,
    profile_max_delay,
    search_shortest_sets,
    sidon_pool,
    uniform_profile,
    window_profile,
)
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
    transform_transcript,
)
from .analysis import (
    ResilienceQuery,
    delay_curve,
    jam_success_probability,
    memory_model,
    operation_count,
    worst_case_resilience,
)
from .simkit import (
    HIGH_ERROR,
    LOW_ERROR,
    GilbertElliot,
    SchemeConfig,
    TrialPlan,
    ge_stationary_per,
    run_channel_experiment,
    run_dos_comparison,
    run_jammer_experiment,
    run_predictor_experiment,
)

__version__ = "0.1.0"
