"""Physical-layer provisioning: rates, per-channel power and bandwidth,
TDMA slotting and interference measurement.

Units: power in W, bandwidth in Hz, rates in bits/s, noise density in W/Hz.
All "log N" factors are base 2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from mrrh import geometry
from mrrh.errors import InvalidConfigError, InvalidInputError
from mrrh.topology import ChannelPlan, HierarchicalNetwork

LN2 = math.log(2.0)


@dataclass(frozen=True)
class PhyConfig:
    eta0: float = 1.0
    lam: float = 1.0
    d: float = 2.0
    # 1.0 uses the per-slot rate 24 lam 2^k log N; log2(N) reproduces the
    # headline statement's extra log factor
    rate_log_power: int = 1

    def __post_init__(self):
        if not self.eta0 > 0:
            raise InvalidConfigError(f"eta0 must be > 0, got {self.eta0}")
        if self.lam < 0:
            raise InvalidConfigError(f"lambda must be >= 0, got {self.lam}")
        if not self.d > 0:
            raise InvalidConfigError(f"d must be > 0, got {self.d}")
        if self.rate_log_power not in (1, 2):
            raise InvalidConfigError("rate_log_power must be 1 or 2")


@dataclass(frozen=True)
class PhyProvision:
    power: tuple[float, ...]       # P_k, W
    bandwidth: tuple[float, ...]   # B_k, Hz
    rate: tuple[float, ...]        # R^k, bits/s
    p_avg: float
    b_total: float

    @property
    def n_channels(self) -> int:
        return len(self.power)


def awgn_rate(P, gain, B, eta0, interference=0.0):
    """Shannon rate ``B log2(1 + P gain / (B eta0 + I))``."""
    if np.any(np.asarray(B) <= 0):
        raise InvalidConfigError("bandwidth must be > 0")
    if not eta0 > 0:
        raise InvalidConfigError("eta0 must be > 0")
    snr = np.asarray(P) * np.asarray(gain) / (np.asarray(B) * eta0 + np.asarray(interference))
    # log1p keeps precision when the SNR is tiny (large B)
    out = np.asarray(B) * np.log1p(snr) / LN2
    return float(out) if out.ndim == 0 else out


def rate_power_limit(P, gain, eta0):
    """Infinite-bandwidth limit of :func:`awgn_rate`: ``P gain / (eta0 ln 2)``."""
    if not eta0 > 0:
        raise InvalidConfigError("eta0 must be > 0")
    out = np.asarray(P) * np.asarray(gain) / (eta0 * LN2)
    return float(out) if out.ndim == 0 else out


def required_channel_rate(lam: float, k: int, n: int, log_power: int = 1) -> float:
    """Per-link rate ``24 lam 2^k (log2 N)^log_power`` while a slot is held."""
    return 24.0 * lam * 2.0**k * math.log2(n) ** log_power


def channel_power(lam: float, k: int, plan: ChannelPlan, radius: float,
                  d: float, eta0: float) -> float:
    """``lam eta0 ln2 (2 pi R)^d 2^k theta_k^d (log2 N)^2``."""
    if not 0 <= k <= plan.K:
        raise InvalidInputError(f"channel {k} outside [0, {plan.K}]")
    n = plan.n
    return (lam * eta0 * LN2 * (2.0 * math.pi * radius) ** d * 2.0**k
            * plan.theta[k] ** d * math.log2(n) ** 2)


def channel_bandwidth(P_k: float, k: int, n: int, d: float,
                      radius: float = 1.0, eta0: float = 1.0) -> float:
    """Interference-masking bandwidth
    ``6 P_k N^(d/2) (8 pi R)^-d (2^k log2 N)^(-d/2) / eta0``.

    ``B_k eta0`` then equals :func:`interference_bound`, so the noise floor
    dominates the worst-case slot interference. At ``R = eta0 = 1`` this is
    ``6 P_k N^(d/2) (8 pi)^-d (2^k log2 N)^(-d/2)``.
    """
    return (6.0 * P_k * n ** (d / 2.0) * (8.0 * math.pi * radius) ** (-d)
            * (2.0**k * math.log2(n)) ** (-d / 2.0) / eta0)


def interference_bound(P_k: float, k: int, n: int, radius: float, d: float) -> float:
    """Closed-form slot interference cap ``6 P_k (8 pi R sqrt(2^k log2 N / N))^-d``."""
    return 6.0 * P_k * (8.0 * math.pi * radius * math.sqrt(2.0**k * math.log2(n) / n)) ** (-d)


def provision(net: HierarchicalNetwork, phy: PhyConfig) -> PhyProvision:
    n, R, d = net.n, net.config.radius, phy.d
    powers, bands, rates = [], [], []
    for k in range(net.K + 1):
        P_k = channel_power(phy.lam, k, net.plan, R, d, phy.eta0)
        powers.append(P_k)
        bands.append(channel_bandwidth(P_k, k, n, d, R, phy.eta0))
        rates.append(required_channel_rate(phy.lam, k, n, phy.rate_log_power))
    p_avg = sum(2.0**-k * p for k, p in enumerate(powers))
    return PhyProvision(tuple(powers), tuple(bands), tuple(rates), p_avg, sum(bands))


@dataclass(frozen=True)
class TdmaSchedule:
    channel: int
    nodes: np.ndarray   # ids with the channel open
    slots: np.ndarray   # slot index per entry of ``nodes``
    n_slots: int
    budget: int

    def slot_of(self, node: int) -> int:
        pos = np.searchsorted(self.nodes, node)
        if pos >= len(self.nodes) or self.nodes[pos] != node:
            raise InvalidInputError(f"node {node} is not on channel {self.channel}")
        return int(self.slots[pos])

    def transmitters(self, slot: int) -> np.ndarray:
        return self.nodes[self.slots == slot]


def slot_budget(n: int) -> int:
    return int(math.floor(6.0 * math.log2(n))) + 1


def conflict_pairs(net: HierarchicalNetwork, k: int, separation: float = 1.0) -> np.ndarray:
    """Index pairs (into ``net.members(k)``) closer than ``separation * theta_k``."""
    ids = net.members(k)
    if len(ids) < 2:
        return np.empty((0, 2), dtype=np.int64)
    theta = min(math.pi, separation * net.plan.theta[k])
    unit = net.unit[ids]
    chord = 2.0 * math.sin(theta / 2.0)
    pairs = cKDTree(unit).query_pairs(chord * (1.0 + 1e-9) + 1e-12, output_type="ndarray")
    if len(pairs) == 0:
        return pairs.reshape(0, 2)
    a, b = unit[pairs[:, 0]], unit[pairs[:, 1]]
    ang = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))
    return pairs[ang < theta]


def tdma_schedule(net: HierarchicalNetwork, k: int, separation: float = 1.0) -> TdmaSchedule:
    """Greedy coloring of the channel-``k`` conflict graph.

    Vertices are taken by descending degree, ties by node id; each gets the
    smallest slot unused by its already-colored neighbors. Two nodes
    conflict when closer than ``separation * theta_k``.
    """
    if not 0 <= k <= net.K:
        raise InvalidInputError(f"channel {k} outside [0, {net.K}]")
    if not separation > 0:
        raise InvalidConfigError(f"separation must be > 0, got {separation}")
    ids = net.members(k)
    m = len(ids)
    pairs = conflict_pairs(net, k, separation)
    adj = [[] for _ in range(m)]
    for a, b in pairs:
        adj[a].append(b)
        adj[b].append(a)
    degree = np.array([len(x) for x in adj], dtype=np.int64)
    order = np.lexsort((ids, -degree))
    slots = np.full(m, -1, dtype=np.int64)
    for v in order:
        used = {slots[u] for u in adj[v]}
        s = 0
        while s in used:
            s += 1
        slots[v] = s
    n_slots = int(slots.max()) + 1 if m else 0
    return TdmaSchedule(k, ids, slots, n_slots, slot_budget(net.n))


def schedule_conflicts(net: HierarchicalNetwork, schedule: TdmaSchedule) -> int:
    """Same-slot pairs closer than ``theta_k``, found by exhaustive scan."""
    k = schedule.channel
    bad = 0
    for s in range(schedule.n_slots):
        tx = schedule.transmitters(s)
        if len(tx) < 2:
            continue
        u = net.unit[tx]
        ang = np.arccos(np.clip(u @ u.T, -1.0, 1.0))
        iu = np.triu_indices(len(tx), 1)
        bad += int(np.count_nonzero(ang[iu] < net.plan.theta[k] * (1 - 1e-12)))
    return bad


def interference_at(net: HierarchicalNetwork, schedule: TdmaSchedule, receiver: int,
                    slot: int, P_k: float, d: float, exclude=()) -> float:
    """Total power reaching ``receiver`` from every transmitter in ``slot``.

    ``exclude`` lists transmitters left out of the sum, normally the
    intended sender of the receiver's own link.
    """
    tx = schedule.transmitters(slot)
    if np.any(tx == receiver):
        raise InvalidInputError(f"node {receiver} transmits in slot {slot}")
    if len(exclude):
        tx = tx[~np.isin(tx, np.asarray(exclude))]
    if len(tx) == 0:
        return 0.0
    ang = geometry.angles_to(net.unit[tx], net.unit[receiver])
    return float(P_k * np.sum(geometry.path_loss(ang, d, net.config.radius)))


@dataclass(frozen=True)
class LinkSample:
    channel: int
    slot: int
    sender: int
    receiver: int
    gain: float
    interference: float


def sample_links(net: HierarchicalNetwork, schedule: TdmaSchedule, P_k: float, d: float,
                 rng: np.random.Generator) -> list[LinkSample]:
    """One link per transmitter per slot, everyone in the slot active.

    The receiver is a uniformly chosen channel-k neighbor of the sender; its
    interference counts every other transmitter of the slot.
    """
    k = schedule.channel
    out = []
    for s in range(schedule.n_slots):
        tx = schedule.transmitters(s)
        for u in tx:
            nbrs = net.neighbors(int(u), k)
            if len(nbrs) == 0:
                continue
            j = int(nbrs[rng.integers(len(nbrs))])
            ang = geometry.spherical_angle(net.unit[u], net.unit[j])
            gain = geometry.path_loss(ang, d, net.config.radius)
            i_tot = interference_at(net, schedule, j, s, P_k, d, exclude=(int(u),))
            out.append(LinkSample(k, s, int(u), j, gain, i_tot))
    return out


@dataclass
class SufficiencyReport:
    n_links: int
    power_violations: int   # rate < infinite-bandwidth limit / 4
    demand_violations: int  # rate < required rate / slot count
    bandwidth_scale: float

    @property
    def power_violation_fraction(self) -> float:
        return self.power_violations / self.n_links if self.n_links else 0.0

    @property
    def demand_violation_fraction(self) -> float:
        return self.demand_violations / self.n_links if self.n_links else 0.0


def verify_rate_sufficiency(links, prov: PhyProvision, schedules, eta0: float,
                            bandwidth_scale: float = 1.0) -> SufficiencyReport:
    """Check every sampled link against the /4 loss and the TDMA demand.

    ``schedules`` maps channel -> :class:`TdmaSchedule`; ``bandwidth_scale``
    multiplies every ``B_k`` (values below 1 under-provision on purpose).
    """
    pv = dv = 0
    for ln in links:
        k = ln.channel
        P = prov.power[k]
        B = prov.bandwidth[k] * bandwidth_scale
        r = awgn_rate(P, ln.gain, B, eta0, ln.interference)
        if r < rate_power_limit(P, ln.gain, eta0) / 4.0:
            pv += 1
        if r < prov.rate[k] / max(schedules[k].n_slots, 1):
            dv += 1
    return SufficiencyReport(len(links), pv, dv, bandwidth_scale)


def measured_average_power(prov: PhyProvision, duty: np.ndarray) -> float:
    """``N^-1 sum_i sum_k duty[i, k] P_k`` for per-node duty fractions."""
    duty = np.asarray(duty, dtype=float)
    if duty.ndim != 2 or duty.shape[1] != prov.n_channels:
        raise InvalidInputError(f"duty must have shape (N, {prov.n_channels})")
    if np.any(duty < 0) or np.any(duty > 1):
        raise InvalidInputError("duty fractions must lie in [0, 1]")
    return float(np.sum(duty @ np.asarray(prov.power))) / duty.shape[0]


def occupancy_duty(net: HierarchicalNetwork) -> np.ndarray:
    """Duty matrix with ``duty[i, k] = 1`` iff channel ``k`` of ``i`` is open."""
    return (net.levels[:, None] >= np.arange(net.K + 1)[None, :]).astype(float)
