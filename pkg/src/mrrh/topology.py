"""The randomized multi-channel hierarchy.

A network is ``N`` uniform points on a sphere. Channel ``k`` links nodes
closer than the cap angle ``theta_k``; caps double in area per channel.
Each node draws a level from a truncated geometric law and opens channels
``0..level``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from mrrh import geometry
from mrrh.errors import ClosedChannelError, InvalidConfigError, InvalidInputError
from mrrh.rng import as_generator, stream

MIN_NODES = 8


@dataclass(frozen=True)
class NetworkConfig:
    n: int
    radius: float = 1.0
    seed: int = 0
    hop_limit: int | None = None

    def __post_init__(self):
        if self.n < MIN_NODES:
            raise InvalidConfigError(f"need at least {MIN_NODES} nodes, got {self.n}")
        if not self.radius > 0:
            raise InvalidConfigError(f"radius must be > 0, got {self.radius}")
        if self.hop_limit is not None and self.hop_limit < 1:
            raise InvalidConfigError(f"hop_limit must be >= 1, got {self.hop_limit}")

    @property
    def effective_hop_limit(self) -> int:
        return self.n if self.hop_limit is None else self.hop_limit


@dataclass(frozen=True)
class ChannelPlan:
    """Cap half-angles and areas for channels ``0..K`` (``K + 1`` entries)."""

    n: int
    n_channels: int
    theta: tuple[float, ...]
    area: tuple[float, ...]
    radius: float

    @property
    def K(self) -> int:
        return self.n_channels

    @property
    def theta_array(self) -> np.ndarray:
        return np.asarray(self.theta)


def derive_channel_count(n: int) -> int:
    """K = max(1, floor(log2 N - 2 log2 log2 N))."""
    if n < MIN_NODES:
        raise InvalidConfigError(f"need at least {MIN_NODES} nodes, got {n}")
    lg = math.log2(n)
    return max(1, math.floor(lg - 2.0 * math.log2(lg)))


def cap_fraction(n: int, k: int) -> float:
    """Unclamped ``1 - cos(theta_k) = 32 log2(N) 2^k / N``."""
    return 32.0 * math.log2(n) * 2.0**k / n


def build_channel_plan(n: int, radius: float = 1.0) -> ChannelPlan:
    K = derive_channel_count(n)
    thetas = []
    areas = []
    for k in range(K + 1):
        one_minus_cos = min(2.0, cap_fraction(n, k))
        theta = 2.0 * math.asin(math.sqrt(one_minus_cos / 2.0))
        thetas.append(theta)
        areas.append(geometry.cap_area(theta, radius))
    return ChannelPlan(n, K, tuple(thetas), tuple(areas), radius)


def level_distribution(K: int) -> np.ndarray:
    """Pr{level = k}: 2^-(k+1) below K, the residual 2^-K at K."""
    if K < 1:
        raise InvalidConfigError(f"K must be >= 1, got {K}")
    p = 0.5 ** (np.arange(K + 1) + 1.0)
    p[K] = 0.5**K
    return p


def assign_levels(n: int, K: int, seed) -> np.ndarray:
    if K < 1:
        raise InvalidConfigError(f"K must be >= 1, got {K}")
    rng = as_generator(seed)
    # geometric(1/2) counts trials to first success, so subtract one
    draws = rng.geometric(0.5, size=n) - 1
    return np.minimum(draws, K).astype(np.int64)


class HierarchicalNetwork:
    """Immutable snapshot of positions, levels and the per-channel index.

    Each channel ``k`` keeps a KD-tree over the unit vectors of nodes whose
    level is at least ``k``; cap queries become chord-radius ball queries,
    refined by an exact angle test.
    """

    def __init__(self, config: NetworkConfig, plan: ChannelPlan,
                 positions: np.ndarray, levels: np.ndarray):
        positions = np.array(positions, dtype=float)
        levels = np.array(levels, dtype=np.int64)
        if positions.shape != (config.n, 3) or levels.shape != (config.n,):
            raise InvalidInputError("positions and levels must cover every node")
        if levels.min() < 0 or levels.max() > plan.K:
            raise InvalidInputError(f"levels must lie in [0, {plan.K}]")
        positions.setflags(write=False)
        levels.setflags(write=False)
        self.config = config
        self.plan = plan
        self.positions = positions
        self.levels = levels
        unit = positions / config.radius
        unit.setflags(write=False)
        self.unit = unit
        self._members = []
        self._trees = []
        for k in range(plan.K + 1):
            ids = np.flatnonzero(levels >= k)
            self._members.append(ids)
            self._trees.append(cKDTree(unit[ids]) if len(ids) else None)
        self._cand_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def K(self) -> int:
        return self.plan.K

    def members(self, k: int) -> np.ndarray:
        """Ids of nodes with channel ``k`` open."""
        return self._members[k]

    def angles_from(self, i: int, ids: np.ndarray) -> np.ndarray:
        return geometry.angles_to(self.unit[ids], self.unit[i])

    def cap_query(self, center_unit: np.ndarray, theta: float, k: int) -> np.ndarray:
        """Sorted ids with channel ``k`` open strictly within ``theta`` of a point."""
        tree = self._trees[k]
        if tree is None:
            return np.empty(0, dtype=np.int64)
        chord = 2.0 * math.sin(min(theta, math.pi) / 2.0)
        local = tree.query_ball_point(center_unit, chord * (1.0 + 1e-9) + 1e-12)
        ids = self._members[k][np.asarray(local, dtype=np.int64)]
        if len(ids) == 0:
            return ids
        ang = geometry.angles_to(self.unit[ids], center_unit)
        return np.sort(ids[ang < theta])

    def neighbors(self, i: int, k: int) -> np.ndarray:
        """Sorted ids of the channel-``k`` neighborhood of node ``i``."""
        self._check_node(i)
        if not 0 <= k <= self.K:
            raise InvalidInputError(f"channel {k} outside [0, {self.K}]")
        if k > self.levels[i]:
            raise ClosedChannelError(f"node {i} has level {self.levels[i]}, channel {k} closed")
        ids = self.cap_query(self.unit[i], self.plan.theta[k], k)
        return ids[ids != i]

    def candidates(self, i: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Union of all open-channel neighborhoods of ``i``.

        Returns ``(ids, lowest_channel, highest_channel)`` sorted by id, where
        the channel arrays give the smallest and largest open channel in
        which each id is a neighbor of ``i``.
        """
        hit = self._cand_cache.get(i)
        if hit is not None:
            return hit
        li = int(self.levels[i])
        per_channel = [self.neighbors(i, k) for k in range(li + 1)]
        ids = np.unique(np.concatenate(per_channel)) if per_channel else np.empty(0, np.int64)
        lo = np.full(len(ids), self.K + 1, dtype=np.int64)
        for k in range(li, -1, -1):
            lo[np.isin(ids, per_channel[k], assume_unique=True)] = k
        hi = np.minimum(self.levels[ids], li)
        for arr in (ids, lo, hi):
            arr.setflags(write=False)
        self._cand_cache[i] = (ids, lo, hi)
        return ids, lo, hi

    def phase_of(self, i: int, target) -> int:
        self._check_node(i)
        target = np.asarray(target, dtype=float)
        ang = float(geometry.angles_to(self.unit[i][None, :], target / np.linalg.norm(target))[0])
        return phase_for_angle(self.plan, ang)

    def _check_node(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise InvalidInputError(f"unknown node id {i}")


def phase_for_angle(plan: ChannelPlan, angle: float) -> int:
    """Index ``g`` with ``theta_g < angle <= theta_{g+1}``, clipped to ``[0, K]``."""
    g = int(np.searchsorted(plan.theta_array, angle, side="left")) - 1
    return min(max(g, 0), plan.K)


def phases_for_angles(plan: ChannelPlan, angles: np.ndarray) -> np.ndarray:
    g = np.searchsorted(plan.theta_array, angles, side="left") - 1
    return np.clip(g, 0, plan.K)


def build_network(config: NetworkConfig) -> HierarchicalNetwork:
    plan = build_channel_plan(config.n, config.radius)
    positions = geometry.sample_uniform_sphere(
        config.n, config.radius, stream(config.seed, config.n, "positions"))
    levels = assign_levels(config.n, plan.K, stream(config.seed, config.n, "levels"))
    return HierarchicalNetwork(config, plan, positions, levels)


def resample_levels(net: HierarchicalNetwork, seed) -> HierarchicalNetwork:
    """Fresh levels on the same placement; ``net`` itself is left untouched."""
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        rng = stream(int(seed), net.n, "resample")
    levels = assign_levels(net.n, net.K, rng)
    return HierarchicalNetwork(net.config, net.plan, net.positions, levels)


def neighbors(net: HierarchicalNetwork, i: int, k: int) -> np.ndarray:
    return net.neighbors(i, k)


def phase_of(net: HierarchicalNetwork, i: int, target) -> int:
    return net.phase_of(i, target)


def cap_populations(net: HierarchicalNetwork, k: int, n_caps: int, seed) -> np.ndarray:
    """Channel-``k`` node counts in random caps of area ``2^(k-2) A_0``.

    Centers are uniform on the sphere. The expected count is ``4 log2 N``.
    """
    if not 0 <= k <= net.K:
        raise InvalidInputError(f"channel {k} outside [0, {net.K}]")
    area = min(2.0 ** (k - 2) * net.plan.area[0], 4.0 * math.pi * net.config.radius**2)
    theta = geometry.cap_angle(area, net.config.radius)
    centers = geometry.sample_uniform_sphere(n_caps, 1.0, as_generator(seed))
    return np.array([len(net.cap_query(c, theta, k)) for c in centers], dtype=np.int64)
