import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrrh import geometry, phy
from mrrh.errors import InvalidConfigError, InvalidInputError
from mrrh.topology import (
    HierarchicalNetwork, NetworkConfig, build_channel_plan, build_network,
)

LN2 = math.log(2)


def _const_density(n):
    return math.sqrt(n / (4 * math.pi))


@pytest.fixture(scope="module")
def net1024():
    return build_network(NetworkConfig(1024, _const_density(1024), 7))


class TestRates:
    def test_zero_signal(self):
        assert phy.awgn_rate(0.0, 1.0, 10.0, 1.0) == 0.0

    def test_unit_snr(self):
        B, eta0 = 3.0, 0.5
        assert phy.awgn_rate(B * eta0, 1.0, B, eta0) == pytest.approx(B, rel=1e-12)

    def test_decreasing_in_interference(self):
        r = [phy.awgn_rate(5.0, 0.3, 2.0, 1.0, i) for i in (0.0, 0.5, 4.0)]
        assert r[0] > r[1] > r[2]

    def test_invalid(self):
        with pytest.raises(InvalidConfigError):
            phy.awgn_rate(1.0, 1.0, 0.0, 1.0)
        with pytest.raises(InvalidConfigError):
            phy.awgn_rate(1.0, 1.0, 1.0, 0.0)

    def test_limit_unit_value(self):
        # P gain / (eta0 ln2) = 1 at P = eta0 ln2
        eta0 = 2.5
        assert phy.rate_power_limit(eta0 * LN2, 1.0, eta0) == pytest.approx(1.0, rel=1e-12)

    def test_limit_linear_in_gain(self):
        assert phy.rate_power_limit(3.0, 0.5, 1.0) == pytest.approx(phy.rate_power_limit(3.0, 1.0, 1.0) / 2)

    def test_large_bandwidth_approaches_limit(self):
        P, g, eta0 = 4.0, 0.2, 1.5
        lim = phy.rate_power_limit(P, g, eta0)
        for B in (1e6 * P * g / eta0, 1e9):
            ratio = phy.awgn_rate(P, g, B, eta0) / lim
            assert 0.99 <= ratio <= 1.0

    def test_rate_below_limit_random(self):
        rng = np.random.default_rng(0)
        P = 10 ** rng.uniform(-3, 3, 10_000)
        g = rng.uniform(1e-4, 1, 10_000)
        B = 10 ** rng.uniform(-3, 4, 10_000)
        eta0 = 0.7
        I = 10 ** rng.uniform(-4, 2, 10_000)
        assert np.all(phy.awgn_rate(P, g, B, eta0, I) <= phy.rate_power_limit(P, g, eta0) * (1 + 1e-12))

    @given(st.floats(1e-3, 1e3), st.floats(1e-3, 1.0), st.floats(1e-3, 1e6), st.floats(1e-2, 1e2))
    def test_rate_below_limit_property(self, P, g, B, eta0):
        assert phy.awgn_rate(P, g, B, eta0) <= phy.rate_power_limit(P, g, eta0) * (1 + 1e-12)

    def test_required_rate(self):
        assert phy.required_channel_rate(1.0, 0, 1024) == pytest.approx(240.0)
        assert phy.required_channel_rate(1.0, 3, 1024) == pytest.approx(1920.0)
        assert phy.required_channel_rate(0.0, 2, 1024) == 0.0
        assert phy.required_channel_rate(1.0, 0, 1024, log_power=2) == pytest.approx(2400.0)


class TestProvisionFormulas:
    def test_power_unit_case(self):
        # theta_k = 1, k = 0, log2 N = 1: ln2 (2 pi)^d
        plan = build_channel_plan(1024)
        plan = type(plan)(2, plan.K, (1.0,) + plan.theta[1:], plan.area, 1.0)
        for d in (2.0, 3.0):
            assert phy.channel_power(1.0, 0, plan, 1.0, d, 1.0) == pytest.approx(LN2 * (2 * math.pi) ** d)

    def test_power_linear_in_lambda(self):
        plan = build_channel_plan(1024)
        a = phy.channel_power(1.0, 2, plan, 3.0, 2.0, 0.4)
        assert phy.channel_power(2.0, 2, plan, 3.0, 2.0, 0.4) == pytest.approx(2 * a)

    def test_power_n1024_k1(self):
        plan = build_channel_plan(1024)
        p = phy.channel_power(1.0, 1, plan, 1.0, 2.0, 1.0)
        assert p == pytest.approx(7.70e3, rel=2e-3)
        assert p == pytest.approx(2 * LN2 * (2 * math.pi) ** 2 * plan.theta[1] ** 2 * 100, rel=1e-12)

    def test_power_channel_range(self):
        with pytest.raises(InvalidInputError):
            phy.channel_power(1.0, 9, build_channel_plan(1024), 1.0, 2.0, 1.0)

    def test_bandwidth_zero_power(self):
        assert phy.channel_bandwidth(0.0, 1, 1024, 2.0) == 0.0

    def test_bandwidth_d2_simplification(self):
        n, k, P = 2048, 2, 13.0
        ref = 6 * P * n * (8 * math.pi) ** -2 / (2**k * math.log2(n))
        assert phy.channel_bandwidth(P, k, n, 2.0) == pytest.approx(ref, rel=1e-12)

    def test_bandwidth_channel_ratio(self):
        n, d = 4096, 3.0
        plan = build_channel_plan(n)
        P = [phy.channel_power(1.0, k, plan, 1.0, d, 1.0) for k in range(plan.K + 1)]
        B = [phy.channel_bandwidth(P[k], k, n, d) for k in range(plan.K + 1)]
        for k in range(plan.K):
            assert B[k + 1] / B[k] == pytest.approx(P[k + 1] / P[k] * 2 ** (-d / 2), rel=1e-12)

    def test_bandwidth_masks_interference_bound(self):
        # B_k eta0 equals the closed-form interference cap for any R, eta0
        for R, eta0 in ((1.0, 1.0), (9.0, 0.3)):
            P, k, n, d = 5.0, 1, 2048, 2.0
            B = phy.channel_bandwidth(P, k, n, d, R, eta0)
            assert B * eta0 == pytest.approx(phy.interference_bound(P, k, n, R, d), rel=1e-12)


class TestProvision:
    def test_zero_lambda(self, net1024):
        prov = phy.provision(net1024, phy.PhyConfig(lam=0.0))
        assert prov.p_avg == 0 and prov.b_total == 0
        assert all(p == 0 for p in prov.power + prov.bandwidth + prov.rate)

    def test_unit_params_sum(self):
        net = build_network(NetworkConfig(1024, 1.0, 1))
        assert net.K == 3
        prov = phy.provision(net, phy.PhyConfig())
        plan = net.plan
        hand = 0.0
        for k in range(4):
            Pk = LN2 * (2 * math.pi) ** 2 * 2**k * plan.theta[k] ** 2 * 100.0
            hand += Pk / 2**k
        assert prov.p_avg == pytest.approx(hand, rel=1e-12)
        assert prov.b_total == pytest.approx(sum(prov.bandwidth), rel=1e-15)
        assert all(x > 0 for x in prov.power + prov.bandwidth + prov.rate)

    def test_config_validation(self):
        with pytest.raises(InvalidConfigError):
            phy.PhyConfig(eta0=0.0)
        with pytest.raises(InvalidConfigError):
            phy.PhyConfig(d=-1.0)
        with pytest.raises(InvalidConfigError):
            phy.PhyConfig(rate_log_power=3)

    def test_scaling_exponents(self):
        ns = [512, 1024, 2048, 4096, 8192]
        pav, bt = [], []
        for n in ns:
            net = build_network(NetworkConfig(n, _const_density(n), 1))
            prov = phy.provision(net, phy.PhyConfig())
            pav.append(prov.p_avg)
            bt.append(prov.b_total)
        sp = np.polyfit(np.log(ns), np.log(pav), 1)[0]
        sb = np.polyfit(np.log(ns), np.log(bt), 1)[0]
        assert 0.8 <= sp <= 1.2
        assert 0.8 <= sb <= 1.2


class TestTdma:
    def _pair_net(self, sep_frac):
        plan = build_channel_plan(1024)
        t0 = plan.theta[0]
        lats = [0.0, sep_frac * t0] + [2.2 + 0.01 * j for j in range(6)]
        pts = np.array([[math.cos(a), 0.0, math.sin(a)] for a in lats])
        return HierarchicalNetwork(NetworkConfig(8, 1.0, 0), plan, pts, np.zeros(8, int))

    def test_two_visible_nodes(self):
        net = self._pair_net(0.5)
        sch = phy.tdma_schedule(net, 0)
        assert sch.slot_of(0) != sch.slot_of(1)

    def test_clique(self):
        # the six clustered nodes form a clique; the pair is far from it
        net = self._pair_net(0.5)
        sch = phy.tdma_schedule(net, 0)
        assert sch.n_slots == 6
        assert phy.schedule_conflicts(net, sch) == 0

    def test_budget(self):
        assert phy.slot_budget(1024) == 61
        assert phy.slot_budget(4096) == 73

    def test_valid_on_random_networks(self):
        for seed in (1, 2):
            net = build_network(NetworkConfig(1024, 1.0, seed))
            for k in range(net.K + 1):
                sch = phy.tdma_schedule(net, k)
                assert phy.schedule_conflicts(net, sch) == 0
                np.testing.assert_array_equal(sch.nodes, net.members(k))

    def test_deterministic(self, net1024):
        a = phy.tdma_schedule(net1024, 1)
        b = phy.tdma_schedule(net1024, 1)
        np.testing.assert_array_equal(a.slots, b.slots)

    def test_conflict_pairs_brute_force(self):
        net = build_network(NetworkConfig(300, 1.0, 3))
        for k in range(net.K + 1):
            ids = net.members(k)
            got = {tuple(sorted(p)) for p in phy.conflict_pairs(net, k).tolist()}
            ref = set()
            for a in range(len(ids)):
                for b in range(a + 1, len(ids)):
                    if geometry.spherical_angle(net.unit[ids[a]], net.unit[ids[b]]) < net.plan.theta[k]:
                        ref.add((a, b))
            assert got == ref

    def test_unknown_node(self, net1024):
        sch = phy.tdma_schedule(net1024, net1024.K)
        off = int(np.flatnonzero(net1024.levels < net1024.K)[0])
        with pytest.raises(InvalidInputError):
            sch.slot_of(off)


class TestInterference:
    def test_empty_slot(self, net1024):
        sch = phy.tdma_schedule(net1024, 0)
        rx = int(sch.transmitters(0)[0])
        assert phy.interference_at(net1024, sch, rx, sch.slot_of(rx) + sch.n_slots, 1.0, 2.0) == 0.0

    def test_single_transmitter(self):
        plan = build_channel_plan(1024)
        lats = [0.0, 0.5 * plan.theta[0]] + [2.2 + 0.01 * j for j in range(6)]
        pts = np.array([[math.cos(a), 0.0, math.sin(a)] for a in lats])
        net = HierarchicalNetwork(NetworkConfig(8, 1.0, 0), plan, pts, np.zeros(8, int))
        # one node per slot: node 1 listens while node 0 sends alone
        sch = phy.TdmaSchedule(0, np.arange(8), np.arange(8), 8, phy.slot_budget(8))
        got = phy.interference_at(net, sch, 1, 0, 3.0, 2.0)
        ang = geometry.spherical_angle(pts[0], pts[1])
        assert got == pytest.approx(3.0 * geometry.path_loss(ang, 2.0, 1.0), rel=1e-12)

    def test_exact_sum(self, net1024):
        sch = phy.tdma_schedule(net1024, 0)
        tx = sch.transmitters(0)
        rx = int(np.setdiff1d(np.arange(1024), tx)[0])
        ref = sum(2.0 * geometry.path_loss(geometry.spherical_angle(net1024.positions[u], net1024.positions[rx]),
                                           2.0, net1024.config.radius) for u in tx)
        assert phy.interference_at(net1024, sch, rx, 0, 2.0, 2.0) == pytest.approx(ref, rel=1e-12)

    def test_transmitting_receiver_rejected(self, net1024):
        sch = phy.tdma_schedule(net1024, 0)
        rx = int(sch.transmitters(0)[0])
        with pytest.raises(InvalidInputError):
            phy.interference_at(net1024, sch, rx, 0, 1.0, 2.0)


class TestSufficiency:
    def test_isolated_link(self):
        prov = phy.PhyProvision((10.0,), (1e6,), (1.0,), 10.0, 1e6)
        link = phy.LinkSample(0, 0, 0, 1, 0.5, 0.0)
        sch = {0: phy.TdmaSchedule(0, np.arange(2), np.array([0, 1]), 2, 3)}
        rep = phy.verify_rate_sufficiency([link], prov, sch, 1.0)
        assert rep.power_violations == 0 and rep.demand_violations == 0

    def test_halving_bandwidth_hurts(self):
        prov = phy.PhyProvision((10.0,), (1.0,), (1.0,), 10.0, 1.0)
        # at B = 1, I = 1: rate 1*log2(1 + 5/2) vs limit 5/ln2
        link = phy.LinkSample(0, 0, 0, 1, 0.5, 1.0)
        sch = {0: phy.TdmaSchedule(0, np.arange(2), np.array([0, 1]), 2, 3)}
        full = phy.verify_rate_sufficiency([link], prov, sch, 1.0, 4.0)
        half = phy.verify_rate_sufficiency([link], prov, sch, 1.0, 0.5)
        assert full.power_violations == 0
        assert half.power_violations == 1


class TestMeasuredPower:
    def _prov(self):
        return phy.PhyProvision((4.0, 6.0), (1.0, 1.0), (1.0, 1.0), 4.0 + 3.0, 2.0)

    def test_zero(self):
        assert phy.measured_average_power(self._prov(), np.zeros((5, 2))) == 0.0

    def test_single_node(self):
        duty = np.zeros((5, 2))
        duty[0, 0] = 1
        assert phy.measured_average_power(self._prov(), duty) == pytest.approx(4.0 / 5)

    def test_geometric_duty_equals_p_avg(self):
        duty = np.tile([1.0, 0.5], (7, 1))
        assert phy.measured_average_power(self._prov(), duty) == pytest.approx(7.0)

    def test_bad_duty(self):
        with pytest.raises(InvalidInputError):
            phy.measured_average_power(self._prov(), np.full((2, 2), 1.5))
        with pytest.raises(InvalidInputError):
            phy.measured_average_power(self._prov(), np.zeros((2, 3)))

    def test_occupancy_lln(self):
        n = 100_000
        net = build_network(NetworkConfig(n, _const_density(n), 2))
        prov = phy.provision(net, phy.PhyConfig())
        got = phy.measured_average_power(prov, phy.occupancy_duty(net))
        assert got == pytest.approx(prov.p_avg, rel=0.05)
