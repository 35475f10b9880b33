"""Lower bounds on power and bandwidth, and statistics over routed workloads."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from mrrh import geometry
from mrrh.errors import InvalidInputError
from mrrh.phy import LN2, PhyProvision
from mrrh.router import Workload, WorkloadResult
from mrrh.topology import HierarchicalNetwork


@dataclass(frozen=True)
class BoundInputs:
    lam: float
    latency: float
    n: int
    K: int
    radius: float
    eta0: float = 1.0
    d: float = 2.0

    def __post_init__(self):
        if self.latency < 1:
            raise InvalidInputError(f"latency must be >= 1 hop, got {self.latency}")
        for name in ("lam", "n", "K", "radius", "eta0", "d"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")


def power_lower_bound(inp: BoundInputs) -> float:
    """Average power any scheme with latency ``L`` needs:
    ``eta0 lam / (16 gamma(R / 4L) ln 2)`` with ``gamma(D) = min(1, D^-d)``.
    """
    g = geometry.loss_at_distance(inp.radius / (4.0 * inp.latency), inp.d)
    return inp.eta0 * inp.lam / (16.0 * g * LN2)


def power_lower_bound_density_form(inp: BoundInputs, density: float) -> float:
    """Constant-density, ``d = 2`` specialization ``lam / (rho eta0 48 4pi) N / L^2``.

    Reported next to :func:`power_lower_bound` only; the two are not
    algebraically equivalent.
    """
    return inp.lam / (density * inp.eta0 * 48.0 * 4.0 * math.pi) * inp.n / inp.latency**2


def bandwidth_lower_bound(inp: BoundInputs) -> float:
    """``gamma(2 pi R) / gamma(R / 4L) * N lam / (16 K eta0)``."""
    ratio = (geometry.loss_at_distance(2.0 * math.pi * inp.radius, inp.d)
             / geometry.loss_at_distance(inp.radius / (4.0 * inp.latency), inp.d))
    return ratio * inp.n * inp.lam / (16.0 * inp.K * inp.eta0)


def distant_pair_fraction(net: HierarchicalNetwork, workload: Workload) -> float:
    """Share of pairs whose geodesic separation is at least ``R / 4``."""
    if len(workload) == 0:
        raise InvalidInputError("workload is empty")
    pairs = np.asarray(workload.pairs, dtype=np.int64)
    a, b = net.unit[pairs[:, 0]], net.unit[pairs[:, 1]]
    ang = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))
    geo = geometry.geodesic_distance(ang, net.config.radius)
    return float(np.mean(geo >= net.config.radius / 4.0))


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    max: int
    p50: float
    p95: float
    delivered_fraction: float
    n_packets: int
    n_undelivered: int


def latency_stats(result: WorkloadResult) -> LatencyStats:
    """Hop statistics over delivered traces; failures are only counted."""
    if result.n_packets == 0:
        raise InvalidInputError("no traces to summarize")
    hops = np.array([t.hop_count for t in result.traces if t.delivered], dtype=float)
    undelivered = result.n_packets - len(hops)
    if len(hops) == 0:
        return LatencyStats(math.nan, 0, math.nan, math.nan, 0.0, result.n_packets, undelivered)
    return LatencyStats(
        mean=float(hops.mean()),
        max=int(hops.max()),
        p50=float(np.percentile(hops, 50)),
        p95=float(np.percentile(hops, 95)),
        delivered_fraction=len(hops) / result.n_packets,
        n_packets=result.n_packets,
        n_undelivered=undelivered,
    )


@dataclass(frozen=True)
class UsageReport:
    convention: str
    cells: int
    violations: int
    max_ratio: float  # largest U / bound over all cells

    @property
    def violation_fraction(self) -> float:
        return self.violations / self.cells if self.cells else 0.0


def usage_bound(n: int, n_channels: int) -> np.ndarray:
    """Per-channel usage ceilings ``2^(k+2) log2 N``."""
    return 2.0 ** (np.arange(n_channels) + 2.0) * math.log2(n)


def usage_check(result: WorkloadResult, n: int, convention: str = "smallest",
                usage: np.ndarray | None = None) -> UsageReport:
    """Compare each ``U^k(i)`` with its ceiling; only values above it count.

    ``usage`` overrides the tally stored in ``result`` (used to feed an
    independently recomputed matrix).
    """
    if usage is None:
        usage = result.usage_for(convention)
    bound = usage_bound(n, usage.shape[1])
    viol = int(np.count_nonzero(usage > bound[None, :]))
    ratio = float(np.max(usage / bound[None, :])) if usage.size else 0.0
    return UsageReport(convention, int(usage.size), viol, ratio)


def recount_usage(result: WorkloadResult, convention: str = "smallest") -> np.ndarray:
    """Usage matrix rebuilt from the recorded per-trace channel sequences."""
    usage = np.zeros((result.n, result.n_channels), dtype=np.int64)
    for t in result.traces:
        nodes = np.array([h.node for h in t.hops], dtype=np.int64)
        if convention == "smallest":
            chans = np.array([h.channel for h in t.hops], dtype=np.int64)
        else:
            chans = np.array([h.channel_high for h in t.hops], dtype=np.int64)
        np.add.at(usage, (nodes, chans), 1)
    return usage


@dataclass(frozen=True)
class HierarchyChecks:
    transitions: int
    monotonicity_violations: int
    monotonicity_violations_open: int
    exit_violations: int
    traces: int
    descent_windows: int
    descent_violations: int

    @property
    def monotonicity_violation_fraction(self) -> float:
        return self.monotonicity_violations / self.transitions if self.transitions else 0.0

    @property
    def monotonicity_open_fraction(self) -> float:
        return self.monotonicity_violations_open / self.transitions if self.transitions else 0.0

    @property
    def exit_violation_fraction(self) -> float:
        return self.exit_violations / self.traces if self.traces else 0.0

    @property
    def descent_fraction(self) -> float:
        if not self.descent_windows:
            return 1.0
        return 1.0 - self.descent_violations / self.descent_windows


def hierarchy_checks(net: HierarchicalNetwork, result: WorkloadResult,
                     convention: str = "smallest") -> HierarchyChecks:
    """Per-trace checks of channel climbing and phase descent.

    * monotonicity: a hop on channel ``k`` into relay ``r`` followed by a hop
      on a lower channel while the destination lies outside the
      channel-``k`` cap of ``r``. ``monotonicity_violations_open`` also
      counts drops where the destination is inside the cap but has
      channel ``k`` closed;
    * exit: a run of more than ``2 log2 N`` consecutive hops on one channel
      ``k`` whose relays all sit in a phase above ``k``;
    * descent: phases sampled every ``2 K log2 N`` hops never increase.
    """
    lg = math.log2(net.n)
    run_cap = 2.0 * lg
    stride = max(1, int(math.ceil(2.0 * net.K * lg)))
    theta = net.plan.theta
    transitions = mono = mono_open = exits = windows = climbs = 0
    for t in result.traces:
        hops = t.hops
        chans = [h.channel if convention == "smallest" else h.channel_high for h in hops]
        dst = t.destination
        for a in range(len(hops) - 1):
            transitions += 1
            k, k_next = chans[a], chans[a + 1]
            if k_next >= k:
                continue
            relay = hops[a].next_node
            ang = geometry.spherical_angle(net.unit[relay], net.unit[dst])
            inside = ang < theta[k]
            if not inside:
                mono += 1
            if not (inside and net.levels[dst] >= k):
                mono_open += 1
        run = 0
        prev = None
        flagged = False
        for h, k in zip(hops, chans):
            if k == prev and h.phase > k:
                run += 1
            elif h.phase > k:
                run = 1
            else:
                run = 0
            prev = k
            if run > run_cap:
                flagged = True
        exits += flagged
        phases = [h.phase for h in hops[::stride]]
        for p0, p1 in zip(phases, phases[1:]):
            windows += 1
            climbs += p1 > p0
    return HierarchyChecks(transitions, mono, mono_open, exits, len(result.traces), windows, climbs)


@dataclass(frozen=True)
class OptimalityReport:
    p_avg: float
    b_total: float
    p_lower: float
    b_lower: float
    p_ratio: float
    b_ratio: float
    latency: float

    def to_dict(self) -> dict:
        return asdict(self)


def optimality_ratios(prov: PhyProvision, stats: LatencyStats, inp: BoundInputs) -> OptimalityReport:
    """Provisioned power/bandwidth over the lower bounds at the measured latency.

    The latency inside ``inp`` is replaced by ``stats.mean`` (floored at one
    hop, the smallest latency the bounds accept).
    """
    latency = max(1.0, float(stats.mean))
    inp = BoundInputs(inp.lam, latency, inp.n, inp.K, inp.radius, inp.eta0, inp.d)
    p_lb = power_lower_bound(inp)
    b_lb = bandwidth_lower_bound(inp)
    return OptimalityReport(prov.p_avg, prov.b_total, p_lb, b_lb,
                            prov.p_avg / p_lb, prov.b_total / b_lb, latency)


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    xs = np.log(np.asarray(xs, dtype=float))
    ys = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(xs, ys, 1)[0])
