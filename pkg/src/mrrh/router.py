"""Greedy multi-channel geographic routing and the nearest-neighbor baseline."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from mrrh import geometry
from mrrh.errors import InvalidConfigError, InvalidInputError
from mrrh.rng import as_generator
from mrrh.topology import HierarchicalNetwork, phase_for_angle


class Status(str, enum.Enum):
    DELIVERED = "Delivered"
    STUCK = "Stuck"
    HOP_LIMIT = "HopLimitExceeded"


@dataclass(frozen=True)
class Hop:
    node: int          # transmitting relay
    channel: int       # lowest open channel exposing the next node
    phase: int         # phase of the relay w.r.t. the destination
    next_node: int
    channel_high: int  # highest open channel exposing the next node


@dataclass
class RouteTrace:
    source: int
    destination: int
    status: Status
    hops: list[Hop] = field(default_factory=list)
    final_node: int = -1

    @property
    def hop_count(self) -> int:
        return len(self.hops)

    @property
    def delivered(self) -> bool:
        return self.status is Status.DELIVERED

    @property
    def path(self) -> list[int]:
        return [self.source] + [h.next_node for h in self.hops]

    def channel_tally(self, n_channels: int, convention: str = "smallest") -> np.ndarray:
        tally = np.zeros(n_channels, dtype=np.int64)
        for h in self.hops:
            tally[h.channel if convention == "smallest" else h.channel_high] += 1
        return tally


@dataclass(frozen=True)
class Workload:
    pairs: tuple[tuple[int, int], ...]
    seed: int | None = None

    def __len__(self):
        return len(self.pairs)


def generate_pairing(n: int, seed, n_pairs: int | None = None) -> Workload:
    """Random source/destination pairs with no node sending to itself.

    A uniform derangement is drawn by rejection, then ``n_pairs`` distinct
    sources (default ``n // 2``) are picked uniformly.
    """
    if n < 2:
        raise InvalidConfigError(f"need at least 2 nodes, got {n}")
    if n_pairs is None:
        n_pairs = n // 2
    if not 0 <= n_pairs <= n:
        raise InvalidConfigError(f"n_pairs must be in [0, {n}], got {n_pairs}")
    rng = as_generator(seed)
    while True:
        perm = rng.permutation(n)
        if not np.any(perm == np.arange(n)):
            break
    sources = rng.choice(n, size=n_pairs, replace=False)
    pairs = tuple((int(s), int(perm[s])) for s in sources)
    return Workload(pairs, seed if isinstance(seed, int) else None)


class _Router:
    """Greedy forwarding over one network, with or without the hierarchy."""

    def __init__(self, net: HierarchicalNetwork, base_only: bool = False):
        self.net = net
        self.base_only = base_only
        self._base_cache: dict[int, np.ndarray] = {}

    def candidates(self, i: int):
        if not self.base_only:
            return self.net.candidates(i)
        ids = self._base_cache.get(i)
        if ids is None:
            ids = self.net.neighbors(i, 0)
            self._base_cache[i] = ids
        zeros = np.zeros(len(ids), dtype=np.int64)
        return ids, zeros, zeros

    def step(self, current: int, dest_id: int, dest_unit: np.ndarray):
        """One greedy decision at ``current``.

        Returns ``(next, lowest_channel, highest_channel, angle_at_current)``;
        ``next`` is ``None`` when no neighbor is strictly closer.
        """
        ids, lo, hi = self.candidates(current)
        # one call for candidates and the current node keeps comparisons consistent
        ang = geometry.angles_to(self.net.unit[np.append(ids, current)], dest_unit)
        here = ang[-1]
        ang = ang[:-1]
        if len(ids) == 0:
            return None, -1, -1, here
        pos = np.searchsorted(ids, dest_id)
        if pos < len(ids) and ids[pos] == dest_id:
            return dest_id, int(lo[pos]), int(hi[pos]), here
        closer = ang < here
        if not closer.any():
            return None, -1, -1, here
        masked = np.where(closer, ang, np.inf)
        # argmin takes the first minimum; ids are sorted so ties go to the smallest id
        j = int(np.argmin(masked))
        return int(ids[j]), int(lo[j]), int(hi[j]), here

    def route(self, src: int, dst: int, hop_limit: int | None = None) -> RouteTrace:
        net = self.net
        net._check_node(src)
        net._check_node(dst)
        if hop_limit is None:
            hop_limit = net.config.effective_hop_limit
        if hop_limit < 1:
            raise InvalidConfigError(f"hop_limit must be >= 1, got {hop_limit}")
        if src == dst:
            return RouteTrace(src, dst, Status.DELIVERED, [], src)
        dest_unit = net.unit[dst]
        hops = []
        current = src
        while True:
            if len(hops) >= hop_limit:
                return RouteTrace(src, dst, Status.HOP_LIMIT, hops, current)
            nxt, ch_lo, ch_hi, here = self.step(current, dst, dest_unit)
            if nxt is None:
                return RouteTrace(src, dst, Status.STUCK, hops, current)
            hops.append(Hop(current, ch_lo, phase_for_angle(net.plan, here), nxt, ch_hi))
            current = nxt
            if current == dst:
                return RouteTrace(src, dst, Status.DELIVERED, hops, current)


def next_hop(net: HierarchicalNetwork, current: int, dest, dest_id: int):
    """Greedy choice at ``current``: ``(node, channel)`` or ``None`` when stuck."""
    net._check_node(current)
    net._check_node(dest_id)
    dest = np.asarray(dest, dtype=float)
    nxt, channel, _, _ = _Router(net).step(current, dest_id, dest / np.linalg.norm(dest))
    if nxt is None:
        return None
    return nxt, channel


def route(net: HierarchicalNetwork, src: int, dst: int, hop_limit: int | None = None) -> RouteTrace:
    return _Router(net).route(src, dst, hop_limit)


def nnc_route(net: HierarchicalNetwork, src: int, dst: int, hop_limit: int | None = None) -> RouteTrace:
    """Baseline: greedy over channel 0 only, with every node participating."""
    return _Router(net, base_only=True).route(src, dst, hop_limit)


@dataclass
class WorkloadResult:
    n: int
    n_channels: int
    traces: list[RouteTrace]
    usage: np.ndarray        # (n, K+1) transmissions, lowest-channel attribution
    usage_high: np.ndarray   # same, highest-channel attribution

    @property
    def n_packets(self) -> int:
        return len(self.traces)

    @property
    def delivered_fraction(self) -> float:
        if not self.traces:
            return 0.0
        return sum(t.delivered for t in self.traces) / len(self.traces)

    @property
    def hop_counts(self) -> np.ndarray:
        return np.array([t.hop_count for t in self.traces], dtype=np.int64)

    @property
    def mean_hops(self) -> float:
        hops = [t.hop_count for t in self.traces if t.delivered]
        return float(np.mean(hops)) if hops else 0.0

    @property
    def max_hops(self) -> int:
        return int(self.hop_counts.max()) if self.traces else 0

    def usage_for(self, convention: str) -> np.ndarray:
        if convention == "smallest":
            return self.usage
        if convention == "largest":
            return self.usage_high
        raise InvalidInputError(f"unknown channel convention {convention!r}")


def tally_usage(traces, n: int, n_channels: int) -> tuple[np.ndarray, np.ndarray]:
    usage = np.zeros((n, n_channels), dtype=np.int64)
    usage_high = np.zeros((n, n_channels), dtype=np.int64)
    for t in traces:
        for h in t.hops:
            usage[h.node, h.channel] += 1
            usage_high[h.node, h.channel_high] += 1
    return usage, usage_high


def route_workload(net: HierarchicalNetwork, workload: Workload,
                   hop_limit: int | None = None, nnc: bool = False) -> WorkloadResult:
    router = _Router(net, base_only=nnc)
    traces = [router.route(s, d, hop_limit) for s, d in workload.pairs]
    usage, usage_high = tally_usage(traces, net.n, net.K + 1)
    return WorkloadResult(net.n, net.K + 1, traces, usage, usage_high)
