import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrrh import geometry
from mrrh.errors import InvalidConfigError, InvalidInputError
from mrrh.rng import stream


class TestSampling:
    def test_single_point_on_sphere(self):
        p = geometry.sample_uniform_sphere(1, 3.5, 0)
        assert p.shape == (1, 3)
        np.testing.assert_allclose(np.linalg.norm(p[0]), 3.5, rtol=1e-9)

    def test_norms(self):
        p = geometry.sample_uniform_sphere(1000, 2.0, 4)
        np.testing.assert_allclose(np.linalg.norm(p, axis=1), 2.0, rtol=1e-9)

    def test_deterministic(self):
        a = geometry.sample_uniform_sphere(50, 1.0, 11)
        b = geometry.sample_uniform_sphere(50, 1.0, 11)
        np.testing.assert_array_equal(a, b)

    def test_generator_input(self):
        a = geometry.sample_uniform_sphere(5, 1.0, stream(3, 0, "positions"))
        b = geometry.sample_uniform_sphere(5, 1.0, stream(3, 0, "positions"))
        np.testing.assert_array_equal(a, b)

    def test_polar_cap_fraction(self):
        # closed form (1 - cos t)/2 = 0.25 at t = pi/3
        n = 100_000
        p = geometry.sample_uniform_sphere(n, 1.0, 2)
        frac = np.mean(p[:, 2] > math.cos(math.pi / 3))
        sigma = math.sqrt(0.25 * 0.75 / n)
        assert abs(frac - 0.25) < 3 * sigma

    def test_random_cap_occupancy(self):
        n = 20_000
        p = geometry.sample_uniform_sphere(n, 1.0, 5)
        rng = np.random.default_rng(9)
        for theta in rng.uniform(0.05, math.pi - 0.05, size=20):
            center = geometry.sample_uniform_sphere(1, 1.0, rng)[0]
            cap = geometry.SphericalCap(center, theta, 1.0)
            expected = (1 - math.cos(theta)) / 2
            sigma = math.sqrt(expected * (1 - expected) / n)
            assert abs(cap.contains(p).mean() - expected) < 4 * sigma

    @pytest.mark.parametrize("n,r", [(0, 1.0), (5, 0.0), (5, -1.0)])
    def test_invalid(self, n, r):
        with pytest.raises(InvalidConfigError):
            geometry.sample_uniform_sphere(n, r, 0)


class TestAngles:
    def test_identity(self):
        p = np.array([0.3, -0.4, 0.5])
        assert geometry.spherical_angle(p, p) == 0.0

    def test_antipodal(self):
        R = 7.0
        assert geometry.spherical_angle([0, 0, R], [0, 0, -R]) == pytest.approx(math.pi, abs=1e-15)

    def test_orthogonal(self):
        assert geometry.spherical_angle([2, 0, 0], [0, 2, 0]) == pytest.approx(math.pi / 2, rel=1e-12)

    def test_radius_mismatch(self):
        with pytest.raises(InvalidInputError):
            geometry.spherical_angle([1, 0, 0], [0, 2, 0])

    def test_tiny_angle_precision(self):
        eps = 1e-9
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([math.cos(eps), math.sin(eps), 0.0])
        assert geometry.spherical_angle(a, b) == pytest.approx(eps, rel=1e-6)

    def test_vectorized_matches_scalar(self):
        p = geometry.sample_uniform_sphere(200, 1.0, 1)
        t = p[0]
        vec = geometry.angles_to(p, t)
        ref = [geometry.spherical_angle(q, t) for q in p]
        np.testing.assert_allclose(vec, ref, rtol=1e-12, atol=1e-15)

    def test_symmetry_and_triangle(self):
        p = geometry.sample_uniform_sphere(300, 1.0, 8)
        for a, b, c in p.reshape(100, 3, 3):
            ab = geometry.spherical_angle(a, b)
            assert ab == pytest.approx(geometry.spherical_angle(b, a), abs=1e-15)
            assert 0.0 <= ab <= math.pi
            assert ab <= geometry.spherical_angle(a, c) + geometry.spherical_angle(c, b) + 1e-12


class TestCaps:
    def test_full_sphere(self):
        assert geometry.cap_area(math.pi, 2.0) == pytest.approx(4 * math.pi * 4.0, rel=1e-12)

    def test_hemisphere(self):
        assert geometry.cap_area(math.pi / 2, 3.0) == pytest.approx(2 * math.pi * 9.0, rel=1e-12)

    def test_third_pi(self):
        assert geometry.cap_area(math.pi / 3, 1.0) == pytest.approx(math.pi, rel=1e-12)

    def test_out_of_range(self):
        for bad in (-0.1, math.pi + 1e-6):
            with pytest.raises(InvalidInputError):
                geometry.cap_area(bad, 1.0)

    def test_inverse_examples(self):
        R = 1.7
        assert geometry.cap_angle(4 * math.pi * R**2, R) == math.pi
        assert geometry.cap_angle(2 * math.pi * R**2, R) == pytest.approx(math.pi / 2, rel=1e-12)
        assert geometry.cap_angle(5 * math.pi * R**2, R) == math.pi

    def test_inverse_rejects_nonpositive(self):
        with pytest.raises(InvalidInputError):
            geometry.cap_angle(0.0, 1.0)

    @given(st.floats(1e-6, math.pi), st.floats(0.1, 100.0))
    def test_roundtrip(self, theta, R):
        back = geometry.cap_angle(geometry.cap_area(theta, R), R)
        assert back == pytest.approx(theta, rel=1e-9)

    @given(st.floats(1e-3, 40.0), st.floats(0.1, 3.0))
    def test_area_roundtrip_clamped(self, area, R):
        got = geometry.cap_area(geometry.cap_angle(area, R), R)
        assert got == pytest.approx(min(area, 4 * math.pi * R**2), rel=1e-9)

    def test_increasing(self):
        t = np.linspace(0, math.pi, 500)
        a = [geometry.cap_area(x, 1.0) for x in t]
        assert np.all(np.diff(a) > 0)


class TestHalfAngleRatio:
    def test_pi(self):
        assert geometry.half_angle_area_ratio(math.pi) == pytest.approx(0.5, abs=1e-12)
        assert geometry.half_angle_area_ratio(math.pi) <= 0.5

    def test_half_pi(self):
        assert geometry.half_angle_area_ratio(math.pi / 2) == pytest.approx(1 - math.sqrt(2) / 2, rel=1e-12)

    def test_small_angle(self):
        # Taylor: 1/4 + t^2/64 + O(t^4)
        t = 1e-3
        v = geometry.half_angle_area_ratio(t)
        assert v > 0.25
        assert v == pytest.approx(0.25 + t**2 / 64, abs=1e-12)

    def test_zero_rejected(self):
        with pytest.raises(InvalidInputError):
            geometry.half_angle_area_ratio(0.0)

    def test_matches_cosine_form(self):
        for t in np.linspace(0.1, math.pi, 50):
            ref = (1 - math.cos(t / 2)) / (1 - math.cos(t))
            assert geometry.half_angle_area_ratio(t) == pytest.approx(ref, rel=1e-12)

    # below ~1e-7 the excess t^2/64 drops under one ulp of 0.25
    @settings(max_examples=300)
    @given(st.floats(1e-6, math.pi))
    def test_bounds(self, t):
        v = geometry.half_angle_area_ratio(t)
        assert 0.25 < v <= 0.5


class TestPathLoss:
    def test_zero_angle(self):
        assert geometry.path_loss(0.0, 2, 5.0) == 1.0

    def test_boundary(self):
        R = 3.0
        assert geometry.path_loss(1 / (2 * math.pi * R), 2, R) == pytest.approx(1.0, rel=1e-12)

    def test_unit_sphere_value(self):
        assert geometry.path_loss(1.0, 2, 1.0) == pytest.approx(0.025330, abs=5e-7)
        assert geometry.path_loss(1.0, 2, 1.0) == pytest.approx((2 * math.pi) ** -2, rel=1e-12)

    def test_invalid_exponent(self):
        with pytest.raises(InvalidConfigError):
            geometry.path_loss(0.5, 0.0, 1.0)
        with pytest.raises(InvalidConfigError):
            geometry.loss_at_distance(2.0, -1.0)

    def test_monotone_bounded(self):
        rng = np.random.default_rng(0)
        ang = np.sort(rng.uniform(0, math.pi, 10_000))
        g = geometry.path_loss(ang, 3.0, 2.0)
        assert np.all(g > 0) and np.all(g <= 1)
        assert np.all(np.diff(g) <= 0)

    def test_distance_conventions(self):
        assert geometry.loss_distance(0.5, 2.0) == pytest.approx(2 * math.pi)
        assert geometry.geodesic_distance(0.5, 2.0) == pytest.approx(1.0)
        assert geometry.loss_at_distance(4.0, 2) == pytest.approx(1 / 16)
        assert geometry.loss_at_distance(0.5, 2) == 1.0
