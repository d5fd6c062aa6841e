"""Monte Carlo experiment harness.

A trial runs one request history for a fixed horizon and plays every
configured policy against the same requests (paired comparison), so
regret differences between policies are not inflated by independent
request noise.  Rates are charged either analytically (the expected
per-slot rate of the chosen cache set) or bit-level (actual subpacket
placement and coded delivery).  Per-slot regret is the rate minus a
reference oracle rate; the reference is either the closed-form upper
estimate or the simulated oracle of the same trial.
"""
from __future__ import annotations

import dataclasses
import io

import numpy as np

from .bounds import oracle_rate_upper
from .engine import (
    DEFAULT_SUBSET_CAP,
    DeliveryCapError,
    build_delivery,
    expected_slot_rate,
    sample_placement,
)
from .model import (
    PopularityDistribution,
    RequestProfile,
    SystemParams,
    sample_requests,
    substream,
)
from .policies import (
    POLICY_NAMES,
    lfu_expected_rate,
    lfu_realized_rate,
    make_policy,
    popular_set,
)

# placement substream index per policy; request stream uses index 0
POLICY_STREAM_KEYS = {name: i + 1 for i, name in enumerate(POLICY_NAMES)}

RATE_MODES = ("analytic", "bitlevel")
REFERENCES = ("closed-form", "paired")
LFU_ACCOUNTINGS = ("auto", "per-request", "dedup")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams
    dist: PopularityDistribution
    policies: tuple[str, ...]
    horizon: int
    trials: int
    seed: int
    rate_mode: str = "analytic"
    reference: str = "closed-form"
    lfu_accounting: str = "auto"
    subset_cap: int = DEFAULT_SUBSET_CAP
    dist_label: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        if self.dist.n_files != self.params.n_files:
            raise ValueError("popularity length does not match file count")
        if self.horizon < 1:
            raise ValueError("need at least one slot")
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if not self.policies:
            raise ValueError("need at least one policy")
        for name in self.policies:
            if name not in POLICY_STREAM_KEYS:
                raise ValueError(f"unknown policy: {name}")
        if len(set(self.policies)) != len(self.policies):
            raise ValueError("duplicate policy names")
        if "lfu" in self.policies and self.params.cache_size != int(self.params.cache_size):
            raise ValueError("LFU needs an integer cache size")
        if self.rate_mode not in RATE_MODES:
            raise ValueError(f"unknown rate mode: {self.rate_mode}")
        if self.reference not in REFERENCES:
            raise ValueError(f"unknown reference mode: {self.reference}")
        if self.lfu_accounting not in LFU_ACCOUNTINGS:
            raise ValueError(f"unknown LFU accounting: {self.lfu_accounting}")
        if self.rate_mode == "bitlevel" and self.params.n_users > self.subset_cap:
            raise DeliveryCapError("exact delivery infeasible; use analytic rate")
        if self.reference == "closed-form" and not self.dist.is_sorted():
            raise ValueError("closed-form reference needs sorted popularities")

    def lfu_per_request(self) -> bool:
        """Analytic mode defaults to per-request charging, bit-level to dedup."""
        if self.lfu_accounting == "auto":
            return self.rate_mode == "analytic"
        return self.lfu_accounting == "per-request"


@dataclasses.dataclass(frozen=True)
class PolicyTrace:
    """One policy's slot-by-slot record within a single trial."""

    policy: str
    set_sizes: np.ndarray
    rates: np.ndarray
    cum_regret: np.ndarray
    switches: np.ndarray

    @property
    def total_switches(self) -> int:
        return int(self.switches.sum())


@dataclasses.dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    reference_rates: np.ndarray
    traces: tuple[PolicyTrace, ...]

    def trace(self, policy: str) -> PolicyTrace:
        for tr in self.traces:
            if tr.policy == policy:
                return tr
        raise KeyError(policy)


def _draw_requests(config: ExperimentConfig, trial: int) -> np.ndarray:
    """The trial's (horizon, n_users) request matrix, shared by all policies."""
    rng = substream(config.seed, trial, 0)
    flat = sample_requests(
        config.dist, config.horizon * config.params.n_users, rng
    )
    return flat.requests.reshape(config.horizon, config.params.n_users)


def _decision_matrix(config: ExperimentConfig, policy: str, requests: np.ndarray) -> np.ndarray:
    """(horizon, n_files) cached-set indicators, identical to the policy class.

    Decisions depend on requests only through per-file counts of the
    slots already served, so the whole horizon vectorizes.
    """
    params, dist = config.params, config.dist
    t_len, n = config.horizon, params.n_files
    if policy == "oracle":
        row = np.zeros(n, dtype=bool)
        row[list(popular_set(dist.probs, params))] = True
        return np.broadcast_to(row, (t_len, n))
    if policy == "uniform":
        return np.ones((t_len, n), dtype=bool)

    slot_counts = np.zeros((t_len, n), dtype=np.int64)
    rows = np.repeat(np.arange(t_len), params.n_users)
    np.add.at(slot_counts, (rows, requests.ravel()), 1)
    before = np.zeros_like(slot_counts)
    np.cumsum(slot_counts[:-1], axis=0, out=before[1:])

    if policy == "tracking":
        seen = np.arange(t_len)[:, None] * params.n_users
        with np.errstate(invalid="ignore"):
            est = np.where(seen > 0, before / np.maximum(seen, 1), 0.0)
        decisions = est >= params.threshold
        decisions[0, :] = True
        return decisions
    if policy == "lfu":
        keep = int(params.cache_size)
        order = np.argsort(-before, axis=1, kind="stable")[:, :keep]
        decisions = np.zeros((t_len, n), dtype=bool)
        np.put_along_axis(decisions, order, True, axis=1)
        return decisions
    raise ValueError(f"unknown policy: {policy}")


def _switch_flags(decisions: np.ndarray) -> np.ndarray:
    flags = np.zeros(len(decisions), dtype=bool)
    flags[1:] = np.any(decisions[1:] != decisions[:-1], axis=1)
    return flags


def _analytic_rates(config: ExperimentConfig, policy: str, decisions: np.ndarray) -> np.ndarray:
    """Expected per-slot rate of each decided set, vectorized over slots."""
    params, probs = config.params, config.dist.probs
    n, k, m = params.n_files, params.n_users, params.cache_size
    sizes = decisions.sum(axis=1).astype(np.float64)
    inside = decisions @ probs
    if policy == "lfu":
        if config.lfu_per_request():
            return k * (1.0 - inside)
        weight = 1.0 - (1.0 - probs) ** k
        return weight.sum() - decisions @ weight
    with np.errstate(divide="ignore", invalid="ignore"):
        coded = sizes / m - 1.0 + k * (1.0 - inside)
        leftover = (n - sizes) / (m - sizes) - 1.0
    return np.where(sizes >= m, coded, leftover)


def _bitlevel_rates(
    config: ExperimentConfig, policy: str, trial: int, requests: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Slot loop with real placement and delivery; returns rates, sizes, switches."""
    params = config.params
    pol = make_policy(policy, params, config.dist)
    place_rng = substream(config.seed, trial, POLICY_STREAM_KEYS[policy])
    rates = np.zeros(config.horizon)
    sizes = np.zeros(config.horizon, dtype=np.int64)
    switches = np.zeros(config.horizon, dtype=bool)
    caches = None
    cached_sorted: list[int] = []
    for s in range(config.horizon):
        decision = pol.decide()
        sizes[s] = len(decision.cached)
        switches[s] = decision.switched
        if policy == "lfu":
            rates[s] = lfu_realized_rate(
                decision.cached, requests[s], per_request=config.lfu_per_request()
            )
        else:
            if caches is None or decision.switched:
                cached_sorted = sorted(decision.cached)
                caches = sample_placement(params, cached_sorted, place_rng)
            profile = RequestProfile(requests[s])
            tx = build_delivery(
                params, profile, caches, cached_sorted, subset_cap=config.subset_cap
            )
            rates[s] = tx.rate
        pol.observe(requests[s])
    return rates, sizes, switches


def _policy_record(
    config: ExperimentConfig, policy: str, trial: int, requests: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if config.rate_mode == "analytic":
        decisions = _decision_matrix(config, policy, requests)
        rates = _analytic_rates(config, policy, decisions)
        return rates, decisions.sum(axis=1), _switch_flags(decisions)
    return _bitlevel_rates(config, policy, trial, requests)


def run_trial(config: ExperimentConfig, trial: int) -> TrialResult:
    """Play every configured policy against one sampled request history."""
    requests = _draw_requests(config, trial)
    if config.reference == "closed-form":
        ref = np.full(
            config.horizon, oracle_rate_upper(config.dist, config.params)
        )
    else:
        ref = _policy_record(config, "oracle", trial, requests)[0]
    traces = []
    for name in config.policies:
        if name == "oracle" and config.reference == "paired":
            rates = ref
            decisions_sizes = np.full(
                config.horizon, len(popular_set(config.dist.probs, config.params))
            )
            switches = np.zeros(config.horizon, dtype=bool)
        else:
            rates, decisions_sizes, switches = _policy_record(
                config, name, trial, requests
            )
        traces.append(
            PolicyTrace(
                policy=name,
                set_sizes=np.asarray(decisions_sizes, dtype=np.int64),
                rates=rates,
                cum_regret=np.cumsum(rates - ref),
                switches=switches,
            )
        )
    return TrialResult(trial, config.seed, ref, tuple(traces))


@dataclasses.dataclass(frozen=True)
class PolicyAggregate:
    """Across-trial means per slot for one policy."""

    policy: str
    mean_rate: np.ndarray
    mean_cum_regret: np.ndarray
    stderr_cum_regret: np.ndarray
    mean_switches: np.ndarray


@dataclasses.dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    aggregates: tuple[PolicyAggregate, ...]

    def aggregate(self, policy: str) -> PolicyAggregate:
        for agg in self.aggregates:
            if agg.policy == policy:
                return agg
        raise KeyError(policy)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Independent trials, aggregated in trial order.

    mean_switches accumulates: its value at slot t is the mean number of
    cache rewrites up to and including t.
    """
    per_policy_rates = {name: [] for name in config.policies}
    per_policy_regret = {name: [] for name in config.policies}
    per_policy_switch = {name: [] for name in config.policies}
    for trial in range(config.trials):
        result = run_trial(config, trial)
        for tr in result.traces:
            per_policy_rates[tr.policy].append(tr.rates)
            per_policy_regret[tr.policy].append(tr.cum_regret)
            per_policy_switch[tr.policy].append(np.cumsum(tr.switches))
    aggregates = []
    for name in config.policies:
        regret = np.stack(per_policy_regret[name])
        if config.trials > 1:
            stderr = regret.std(axis=0, ddof=1) / np.sqrt(config.trials)
        else:
            stderr = np.zeros(config.horizon)
        aggregates.append(
            PolicyAggregate(
                policy=name,
                mean_rate=np.stack(per_policy_rates[name]).mean(axis=0),
                mean_cum_regret=regret.mean(axis=0),
                stderr_cum_regret=stderr,
                mean_switches=np.stack(per_policy_switch[name]).mean(axis=0).astype(float),
            )
        )
    return ExperimentResult(config, tuple(aggregates))


def config_summary(config: ExperimentConfig) -> str:
    p = config.params
    return (
        f"n={p.n_files} k={p.n_users} m={p.cache_size:g} f={p.subpackets} "
        f"dist={config.dist_label} policies={','.join(config.policies)} "
        f"horizon={config.horizon} trials={config.trials} seed={config.seed} "
        f"rate_mode={config.rate_mode} reference={config.reference} "
        f"lfu_accounting={config.lfu_accounting}"
    )


def emit_csv(result: ExperimentResult, destination) -> None:
    """Write per-slot aggregates, slot-major, 6 significant digits.

    ``destination`` is a path or a writable text stream.  One comment
    line records the full configuration before the header.
    """
    if hasattr(destination, "write"):
        _write_csv(result, destination)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            _write_csv(result, fh)


def _write_csv(result: ExperimentResult, fh: io.TextIOBase) -> None:
    fh.write(f"# config: {config_summary(result.config)}\n")
    fh.write("t,policy,mean_rate,mean_cum_regret,stderr_cum_regret,mean_switches\n")
    for s in range(result.config.horizon if result.aggregates else 0):
        for agg in result.aggregates:
            fh.write(
                f"{s + 1},{agg.policy},{agg.mean_rate[s]:.6g},"
                f"{agg.mean_cum_regret[s]:.6g},{agg.stderr_cum_regret[s]:.6g},"
                f"{agg.mean_switches[s]:.6g}\n"
            )
