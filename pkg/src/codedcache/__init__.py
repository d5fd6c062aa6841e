"""Coded-caching simulation and analysis under unknown file popularity.

The package splits into five layers: ``model`` (parameters, popularity
profiles, request sampling), ``engine`` (subpacket placement, coded
delivery, decoding, analytic rates), ``policies`` (cache-content
policies and their rate accounting), ``bounds`` (closed-form regret,
switching, and minimax results), and ``harness`` (seeded Monte Carlo
experiments with CSV output).  ``cli`` wires everything to a console
script of the same name.
"""
from .bounds import (
    DegenerateGapError,
    GapVector,
    LowerBoundReport,
    RegretBound,
    SwitchingConstants,
    bad_set_gap,
    bad_set_min_excess,
    is_bad_set,
    mismatch_tail_chernoff,
    mismatch_tail_dkw,
    oracle_rate_upper,
    pair_kl_per_slot,
    pair_kl_total,
    pair_oracle_rate,
    popular_count,
    rate_lower_bound,
    regret_lower_bound,
    regret_lower_curve,
    switch_count_bound,
    switch_event_tails,
    switching_constants,
    threshold_gaps,
    tracking_regret_bound,
    verify_bad_set_gap,
)
from .engine import (
    DEFAULT_SUBSET_CAP,
    CacheState,
    CodedMessage,
    DeliveryCapError,
    DirectSend,
    FuzzResult,
    Segment,
    Transmission,
    approx_rate,
    build_delivery,
    decode,
    expected_slot_rate,
    run_decode_fuzz,
    sample_placement,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    PolicyAggregate,
    PolicyTrace,
    TrialResult,
    emit_csv,
    run_experiment,
    run_trial,
)
from .model import (
    PopularityDistribution,
    RequestProfile,
    SystemParams,
    make_two_level_pair,
    make_zipf,
    popularity_from_counts,
    read_counts_csv,
    sample_requests,
    substream,
)
from .policies import (
    EmpiricalEstimator,
    LfuPolicy,
    OraclePolicy,
    PolicyDecision,
    TrackingPolicy,
    UniformPolicy,
    lfu_expected_rate,
    lfu_realized_rate,
    make_policy,
    popular_set,
)

__version__ = "0.1.0"

__all__ = [
    "CacheState",
    "CodedMessage",
    "DEFAULT_SUBSET_CAP",
    "DegenerateGapError",
    "DeliveryCapError",
    "DirectSend",
    "EmpiricalEstimator",
    "ExperimentConfig",
    "ExperimentResult",
    "FuzzResult",
    "GapVector",
    "LfuPolicy",
    "LowerBoundReport",
    "OraclePolicy",
    "PolicyAggregate",
    "PolicyDecision",
    "PolicyTrace",
    "PopularityDistribution",
    "RegretBound",
    "RequestProfile",
    "Segment",
    "SwitchingConstants",
    "SystemParams",
    "TrackingPolicy",
    "Transmission",
    "TrialResult",
    "UniformPolicy",
    "approx_rate",
    "bad_set_gap",
    "bad_set_min_excess",
    "build_delivery",
    "decode",
    "emit_csv",
    "expected_slot_rate",
    "is_bad_set",
    "lfu_expected_rate",
    "lfu_realized_rate",
    "make_policy",
    "make_two_level_pair",
    "make_zipf",
    "mismatch_tail_chernoff",
    "mismatch_tail_dkw",
    "oracle_rate_upper",
    "pair_kl_per_slot",
    "pair_kl_total",
    "pair_oracle_rate",
    "popular_count",
    "popular_set",
    "popularity_from_counts",
    "rate_lower_bound",
    "read_counts_csv",
    "regret_lower_bound",
    "regret_lower_curve",
    "run_decode_fuzz",
    "run_experiment",
    "run_trial",
    "sample_placement",
    "sample_requests",
    "substream",
    "switch_count_bound",
    "switch_event_tails",
    "switching_constants",
    "threshold_gaps",
    "tracking_regret_bound",
    "verify_bad_set_gap",
]
