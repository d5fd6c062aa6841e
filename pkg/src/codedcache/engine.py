"""Bit-level cache placement, XOR multicast delivery, and decoding.

Files are split into `subpackets` equal pieces and caches are tracked as index
sets, so delivery plans carry exact lengths without simulating payload bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import PopularityDistribution, RequestProfile, SystemParams

# multicast groups are enumerated exhaustively, so 2**|group| must stay sane
DEFAULT_SUBSET_CAP = 20

_EMPTY_INT = np.empty(0, dtype=np.int64)


class DeliveryCapError(RuntimeError):
    """Raised when the multicast group is too large to enumerate exactly."""


@dataclass
class CacheState:
    """Subpacket indices one user holds, keyed by file; missing key = none cached."""

    files: dict[int, np.ndarray] = field(default_factory=dict)

    def subpackets(self, file: int) -> np.ndarray:
        return self.files.get(file, _EMPTY_INT)

    def total_cached(self) -> int:
        return int(sum(len(v) for v in self.files.values()))

    def within_budget(self, params: SystemParams) -> bool:
        return self.total_cached() <= math.ceil(params.cache_size * params.subpackets)


@dataclass(frozen=True)
class Segment:
    """One user's share of a coded message: the subpackets of its file it misses."""

    user: int
    file: int
    indices: np.ndarray


@dataclass(frozen=True)
class CodedMessage:
    """Position-wise XOR of the segments, zero-padded to the longest one."""

    users: tuple[int, ...]
    length: int
    segments: tuple[Segment, ...]


@dataclass(frozen=True)
class DirectSend:
    """A whole requested file broadcast uncoded for one user."""

    user: int
    file: int
    length: int


@dataclass(frozen=True)
class Transmission:
    coded: tuple[CodedMessage, ...]
    direct: tuple[DirectSend, ...]
    subpackets_sent: int
    rate: float


def _check_files(params: SystemParams, files: Iterable[int]) -> list[int]:
    out = sorted(set(int(i) for i in files))
    if out and (out[0] < 0 or out[-1] >= params.n_files):
        raise ValueError("cached file index out of range")
    return out


def sample_placement(
    params: SystemParams, cached: Iterable[int], rng: np.random.Generator
) -> list[CacheState]:
    """Independent random placement of every user's cache over the cached set.

    When the set is at least the budget, each user keeps min(F, floor(M*F/|S|))
    uniformly random subpackets of every file in it.  A smaller set is stored
    whole and the leftover budget is split evenly over the remaining files.
    """
    S = _check_files(params, cached)
    n, f, m = params.n_files, params.subpackets, params.cache_size
    states = [CacheState() for _ in range(params.n_users)]
    if not S:
        return states
    if len(S) >= m:
        per = min(f, int(m * f / len(S)))
        plan = [(i, per) for i in S]
    else:
        leftover = int((m - len(S)) * f / (n - len(S)))
        chosen = set(S)
        plan = [(i, f) for i in S]
        plan += [(i, leftover) for i in range(n) if i not in chosen]
    full = np.arange(f, dtype=np.int64)
    for state in states:
        for i, take in plan:
            if take <= 0:
                continue
            if take >= f:
                state.files[i] = full
            else:
                keys = rng.random(f)
                pick = np.argpartition(keys, take)[:take]
                state.files[i] = np.sort(pick).astype(np.int64)
    return states


def build_delivery(
    params: SystemParams,
    profile: RequestProfile,
    caches: Sequence[CacheState],
    cached: Iterable[int],
    *,
    subset_cap: int = DEFAULT_SUBSET_CAP,
) -> Transmission:
    """Multicast plan for one slot.

    Users whose request lies in the cached set form the coded group.  For every
    nonempty subgroup s, the message XORs, per member k, the subpackets of k's
    file that k misses and exactly the members s\\{k} hold (zero-padded, so the
    message is as long as the largest share; skipped when all shares are
    empty).  Payload-identical messages are broadcast once.  Every request
    outside the cached set is sent whole, one transmission per request, with
    duplicates not merged.
    """
    req = profile.requests
    n, f = params.n_files, params.subpackets
    if len(req) != params.n_users:
        raise ValueError("profile size != n_users")
    if int(req.max()) >= n:
        raise ValueError("request index out of range")
    S = set(_check_files(params, cached))
    group = [k for k in range(params.n_users) if int(req[k]) in S]
    if len(group) > subset_cap:
        raise DeliveryCapError("exact delivery infeasible; use analytic rate")

    # Bucket the subpackets of each requested cached file by exactly which
    # group members hold them.  A member k missing a subpacket held by the set
    # W then has it in bucket W, so share lookups are O(1) per subgroup.
    bit = {k: 1 << j for j, k in enumerate(group)}
    buckets: dict[int, dict[int, np.ndarray]] = {}
    for file in sorted({int(req[k]) for k in group}):
        holders = np.zeros(f, dtype=np.int64)
        for k in group:
            idx = caches[k].subpackets(file)
            if len(idx):
                holders[idx] |= bit[k]
        order = np.argsort(holders, kind="stable")
        cuts = np.flatnonzero(np.diff(holders[order])) + 1
        buckets[file] = {
            int(holders[chunk[0]]): np.sort(chunk) for chunk in np.split(order, cuts)
        }

    coded: list[CodedMessage] = []
    seen: set[frozenset] = set()
    total = 0
    for sbits in range(1, 1 << len(group)):
        members = [group[j] for j in range(len(group)) if sbits >> j & 1]
        segments = []
        for k in members:
            share = buckets[int(req[k])].get(sbits & ~bit[k])
            if share is not None and len(share):
                segments.append(Segment(k, int(req[k]), share))
        if not segments:
            continue
        # two messages with the same (file, holder-set) shares carry the same
        # payload, so broadcasting the second one would be pure waste
        signature = frozenset((s.file, sbits & ~bit[s.user]) for s in segments)
        if signature in seen:
            continue
        seen.add(signature)
        length = max(len(s.indices) for s in segments)
        total += length
        coded.append(CodedMessage(tuple(members), length, tuple(segments)))

    direct = []
    in_group = set(group)
    for k in range(params.n_users):
        if k not in in_group:
            direct.append(DirectSend(k, int(req[k]), f))
            total += f
    return Transmission(tuple(coded), tuple(direct), total, total / f)


def decode(
    params: SystemParams,
    user: int,
    profile: RequestProfile,
    caches: Sequence[CacheState],
    transmission: Transmission,
) -> bool:
    """Peel the slot's transmissions against one user's cache.

    True iff every subpacket of the user's requested file is recovered.  XOR
    terms are modeled symbolically: a position is solved once all but one of
    its terms are known.
    """
    want = int(profile.requests[user])
    known: set[tuple[int, int]] = set()
    for file, idx in caches[user].files.items():
        known.update((file, int(j)) for j in idx)
    for send in transmission.direct:
        known.update((send.file, j) for j in range(send.length))

    pending = list(transmission.coded)
    progress = True
    while progress and pending:
        progress = False
        stuck = []
        for msg in pending:
            unsolved = False
            for pos in range(msg.length):
                terms = [
                    (seg.file, int(seg.indices[pos]))
                    for seg in msg.segments
                    if pos < len(seg.indices)
                ]
                unknown = [t for t in terms if t not in known]
                if len(unknown) == 1:
                    known.add(unknown[0])
                    progress = True
                elif unknown:
                    unsolved = True
            if unsolved:
                stuck.append(msg)
        pending = stuck
    return all((want, j) in known for j in range(params.subpackets))


def approx_rate(
    params: SystemParams, cached: Iterable[int], dist: PopularityDistribution
) -> float:
    """Expected one-slot rate of threshold-style caching of the given set.

    Upper-bound approximation: |S|/M - 1 + K * (mass outside S) when the set
    exceeds the budget; otherwise the set is stored whole and the leftover
    budget is spread over the rest, giving (N - |S|)/(M - |S|) - 1.  The
    spread vanishes exactly at |S| == M < N, where this returns +inf.
    """
    S = _check_files(params, cached)
    n, k, m = params.n_files, params.n_users, params.cache_size
    size = len(S)
    if size > m:
        inside = float(dist.probs[S].sum())
        return size / m - 1.0 + k * (1.0 - inside)
    if size == n:
        return 0.0
    if m - size <= 0:
        return math.inf
    return (n - size) / (m - size) - 1.0


def expected_slot_rate(
    params: SystemParams, cached: Iterable[int], dist: PopularityDistribution
) -> float:
    """approx_rate with the budget boundary charged the way the engine behaves.

    At |S| == M < N the placement stores the set whole and every outside
    request costs a full file, so the per-request branch applies instead of
    the infinite sentinel.  Elsewhere the two functions agree.
    """
    S = _check_files(params, cached)
    n, k, m = params.n_files, params.n_users, params.cache_size
    size = len(S)
    if size >= m:
        inside = float(dist.probs[S].sum())
        return size / m - 1.0 + k * (1.0 - inside)
    return (n - size) / (m - size) - 1.0


@dataclass(frozen=True)
class FuzzResult:
    trials: int
    users_checked: int
    failures: int


def run_decode_fuzz(
    n_trials: int,
    seed: int,
    *,
    corrupt: bool = False,
    max_files: int = 6,
    max_users: int = 5,
    max_cache: float = 3.0,
    max_subpackets: int = 64,
) -> FuzzResult:
    """Random placement/delivery/decode round trips; failures should stay at zero.

    With corrupt=True, one cached subpacket of a served request is dropped
    after the delivery plan is built, so decode failures become the expected
    outcome (a working checker must report some).
    """
    from .model import substream  # local import keeps module load cheap

    failures = 0
    users_checked = 0
    for trial in range(n_trials):
        rng = substream(seed, trial)
        n = int(rng.integers(1, max_files + 1))
        k = int(rng.integers(1, max_users + 1))
        m = float(rng.uniform(0.2, min(max_cache, n)))
        f = int(rng.integers(1, max_subpackets + 1))
        params = SystemParams(n, k, m, f)
        size = int(rng.integers(0, n + 1))
        cached = sorted(int(i) for i in rng.choice(n, size=size, replace=False))
        states = sample_placement(params, cached, rng)
        profile = RequestProfile(rng.integers(0, n, size=k))
        tx = build_delivery(params, profile, states, cached)
        if corrupt:
            in_set = set(cached)
            victims = [
                u
                for u in range(k)
                if int(profile.requests[u]) in in_set
                and len(states[u].subpackets(int(profile.requests[u])))
            ]
            if not victims:
                continue  # nothing cached to break in this draw
            victim = int(rng.choice(victims))
            file = int(profile.requests[victim])
            held = states[victim].files[file]
            drop = int(rng.choice(held))
            states[victim].files[file] = held[held != drop]
        for u in range(k):
            users_checked += 1
            if not decode(params, u, profile, states, tx):
                failures += 1
    return FuzzResult(n_trials, users_checked, failures)
