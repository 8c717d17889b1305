import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fbdiff.flux import (FluxParams, RadialProfile, convexify, flux_q,
                         forward_backward_threshold, lower_hull_indices, potential_psi,
                         psi_star, q_star, radial_profile, scalar_flux, scalar_flux_min_slope,
                         verify_structure, write_envelope_tables)


def flux_integrand(t, p, delta):
    # scalar flux written out independently of the package
    return t / (1 + t * t) + delta * t ** (p - 1)


def brute_hull(x, y):
    """Point k is a lower-hull vertex iff no chord from the left is steeper than one to the right."""
    keep = [0]
    for k in range(1, len(x) - 1):
        left = np.max((y[k] - y[:k]) / (x[k] - x[:k]))
        right = np.min((y[k + 1:] - y[k]) / (x[k + 1:] - x[k]))
        if left < right:
            keep.append(k)
    keep.append(len(x) - 1)
    return np.array(keep)


class TestParams:
    @pytest.mark.parametrize("p,delta", [(1.0, 0.1), (2.5, 0.1), (2.0, 0.0), (1.5, -1.0)])
    def test_rejects_out_of_range(self, p, delta):
        with pytest.raises(ValueError):
            FluxParams(p, delta)


class TestPotential:
    def test_zero(self):
        assert potential_psi(0.0, FluxParams(1.7, 0.4)) == 0.0

    @pytest.mark.parametrize("s,p,delta,expected", [
        (1.0, 2.0, 0.1, 0.5 * np.log(2) + 0.05),
        (2.0, 1.5, 0.3, 0.5 * np.log(5) + 0.2 * 2**1.5),  # = 1.370404
    ])
    def test_matches_quadrature(self, s, p, delta, expected):
        integral, _ = quad(flux_integrand, 0.0, s, args=(p, delta), epsabs=1e-13)
        assert potential_psi(s, FluxParams(p, delta)) == pytest.approx(integral, rel=1e-10)
        assert integral == pytest.approx(expected, abs=1e-6)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            potential_psi(-0.1, FluxParams())

    @given(st.floats(1.01, 2.0), st.floats(0.01, 2.0), st.floats(1e-3, 100.0), st.floats(1e-3, 10.0))
    def test_strictly_increasing(self, p, delta, s, ds):
        params = FluxParams(p, delta)
        assert potential_psi(s + ds, params) > potential_psi(s, params)


class TestFluxQ:
    def test_zero_vector(self):
        assert np.array_equal(flux_q(np.zeros(2), FluxParams(1.5, 0.3)), np.zeros(2))

    def test_examples(self):
        np.testing.assert_allclose(flux_q([1.0, 0.0], FluxParams(2.0, 0.1)), [0.6, 0.0], atol=1e-15)
        np.testing.assert_allclose(flux_q([0.0, 2.0], FluxParams(1.5, 0.3)), [0.0, 0.824264], atol=1e-6)

    def test_finite_difference_gradient(self, rng):
        params = FluxParams(1.5, 0.3)
        mags = rng.uniform(0.1, 10.0, 200)
        angles = rng.uniform(0, 2 * np.pi, 200)
        xi = np.column_stack([mags * np.cos(angles), mags * np.sin(angles)])
        q = flux_q(xi, params)
        for x, qx in zip(xi, q):
            h = 1e-6 * (1 + np.linalg.norm(x))
            grad = [(potential_psi(np.linalg.norm(x + h * e), params)
                     - potential_psi(np.linalg.norm(x - h * e), params)) / (2 * h) for e in np.eye(2)]
            assert np.linalg.norm(grad - qx) <= 1e-5 * np.linalg.norm(qx)

    @given(st.floats(-50, 50), st.floats(-50, 50), st.floats(1.01, 2.0), st.floats(0.01, 1.0))
    def test_odd_and_radial(self, a, b, p, delta):
        params = FluxParams(p, delta)
        xi = np.array([a, b])
        q = flux_q(xi, params)
        np.testing.assert_allclose(flux_q(-xi, params), -q, atol=1e-14)
        n = np.hypot(a, b)
        if n > 1e-6:
            np.testing.assert_allclose(np.linalg.norm(q), scalar_flux(n, params), rtol=1e-12)


class TestMonotonicity:
    def test_monotone_case(self):
        slope, at = scalar_flux_min_slope(FluxParams(2.0, 0.2), 10.0)
        assert slope == pytest.approx(0.2 - 1 / 8, abs=1e-8)
        assert at == pytest.approx(np.sqrt(3), abs=1e-3)

    def test_forward_backward_case(self):
        slope, _ = scalar_flux_min_slope(FluxParams(2.0, 0.1))
        assert slope == pytest.approx(-0.025, abs=1e-8)

    def test_critical_delta(self):
        slope, _ = scalar_flux_min_slope(FluxParams(2.0, 0.125), 10.0, 1_000_001)
        assert abs(slope) <= 1e-6

    def test_dense_oracle(self):
        # (1 - s^2)/(1 + s^2)^2 + delta sampled independently
        s = np.linspace(0, 10, 200_001)
        for delta in (0.05, 0.3):
            oracle = np.min((1 - s**2) / (1 + s**2) ** 2 + delta)
            assert scalar_flux_min_slope(FluxParams(2.0, delta))[0] == pytest.approx(oracle, abs=1e-9)

    def test_threshold(self):
        assert forward_backward_threshold() == pytest.approx(1 / 8, abs=1e-3)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            scalar_flux_min_slope(FluxParams(), 0.0)


class TestProfile:
    def test_invariants(self):
        with pytest.raises(ValueError):
            RadialProfile([0.0, 1.0, 3.0], [0.0, 1.0, 2.0])
        with pytest.raises(ValueError):
            RadialProfile([0.1, 1.0], [0.0, 1.0])
        with pytest.raises(ValueError):
            RadialProfile([0.0], [0.0])
        prof = radial_profile(FluxParams(), 5.0, 11)
        assert prof.n_samples == 11 and prof.s_max == 5.0


@pytest.fixture(scope="module")
def nonconvex_env():
    params = FluxParams(2.0, 0.05)
    return params, convexify(radial_profile(params))


class TestEnvelope:
    def test_convex_input_unchanged(self):
        prof = radial_profile(FluxParams(2.0, 0.2))
        env = convexify(prof)
        np.testing.assert_array_equal(env.env_values, prof.psi_values)
        assert env.contact_mask.all() and not env.segments

    def test_two_points(self):
        env = convexify(RadialProfile([0.0, 1.0], [0.0, 1.0]))
        np.testing.assert_array_equal(env.env_values, [0.0, 1.0])
        assert env.slopes[-1] == 1.0
        assert q_star(0.5, env) == pytest.approx(0.5)  # interpolated between 0 at the origin and 1

    def test_below_and_equal_outside(self, nonconvex_env):
        _, env = nonconvex_env
        psi = env.base.psi_values
        assert np.all(env.env_values <= psi + 1e-12)
        outside = env.contact_mask
        np.testing.assert_allclose(env.env_values[outside], psi[outside], rtol=1e-9, atol=0)

    def test_midpoint_convex(self, nonconvex_env, rng):
        _, env = nonconvex_env
        e = env.env_values
        for d in range(1, 60):
            assert np.all(e[d:-d] <= 0.5 * (e[:-2 * d] + e[2 * d:]) + 1e-9)
        i = rng.integers(0, e.size, 200_000)
        j = rng.integers(0, e.size, 200_000)
        even = (i + j) % 2 == 0
        i, j = i[even], j[even]
        assert np.all(e[(i + j) // 2] <= 0.5 * (e[i] + e[j]) + 1e-9)

    def test_slopes_nondecreasing(self, nonconvex_env, rng):
        _, env = nonconvex_env
        assert np.all(np.diff(env.slopes) >= -1e-12)
        s = np.sort(rng.uniform(0, env.s_max, 100_000))
        assert np.all(np.diff(q_star(s, env)) >= -1e-12)

    def test_contact_agreement(self, nonconvex_env):
        params, env = nonconvex_env
        s = env.base.s_values[env.contact_mask]
        q = scalar_flux(s, params)
        assert np.all(np.abs(q_star(s, env) - q) <= 1e-6 * (1 + np.abs(q)))

    def test_single_segment_matches_brute_hull(self):
        params = FluxParams(2.0, 0.05)
        s = np.linspace(0, 10, 5001)
        psi = 0.5 * np.log1p(s**2) + 0.025 * s**2
        env = convexify(RadialProfile(s, psi))
        oracle = brute_hull(s, psi)
        np.testing.assert_array_equal(env.hull_indices, oracle)
        gaps = np.flatnonzero(np.diff(oracle) > 1)
        assert len(gaps) == 1 and len(env.affine_segments) == 1
        assert env.affine_segments[0] == (oracle[gaps[0]], oracle[gaps[0] + 1])
        np.testing.assert_allclose(env.env_values, np.interp(s, s[oracle], psi[oracle]), atol=1e-12)
        first, last = env.affine_segments[0]
        gap = np.abs(env.env_values - psi)
        np.testing.assert_array_equal(env.contact_mask, gap <= 1e-8 * (1 + np.abs(psi)))
        assert not env.contact_mask[first + 100:last - 100].any()
        # the refined envelope agrees with the sampled one up to grid resolution
        refined = convexify(RadialProfile(s, psi, params))
        assert len(refined.segments) == 1
        seg = refined.segments[0]
        assert seg.start == pytest.approx(s[first], abs=2 * (s[1] - s[0]))
        assert seg.stop == pytest.approx(s[last], abs=2 * (s[1] - s[0]))
        inside = (s > seg.start) & (s < seg.stop)
        assert not refined.contact_mask[inside].any() and refined.contact_mask[~inside].all()

    def test_bitangent_is_tangent_at_both_ends(self, nonconvex_env):
        params, env = nonconvex_env
        (seg,) = env.segments
        for t in (seg.start, seg.stop):
            assert scalar_flux(t, params) == pytest.approx(seg.slope, abs=1e-12)
            assert potential_psi(t, params) == pytest.approx(seg.intercept + seg.slope * t, abs=1e-12)

    def test_q_star_inside_segment_and_origin(self, nonconvex_env):
        _, env = nonconvex_env
        (seg,) = env.segments
        mid = 0.5 * (seg.start + seg.stop)
        assert q_star(mid, env) == seg.slope
        assert q_star(0.0, env) == 0.0
        assert psi_star(mid, env) == pytest.approx(seg.intercept + seg.slope * mid)

    def test_out_of_range(self, nonconvex_env):
        _, env = nonconvex_env
        for bad in (-1e-3, env.s_max * 1.01):
            with pytest.raises(ValueError):
                q_star(bad, env)
            with pytest.raises(ValueError):
                psi_star(bad, env)

    def test_tables(self, nonconvex_env, tmp_path):
        _, env = nonconvex_env
        write_envelope_tables(env, tmp_path / "a.txt", tmp_path / "b.txt", stride=100)
        tab = np.loadtxt(tmp_path / "a.txt")
        assert tab.shape == (501, 2)
        np.testing.assert_allclose(tab[:, 1], env.env_values[::100], rtol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(1.1, 2.0), st.floats(0.01, 0.5))
    def test_envelope_properties(self, p, delta):
        env = convexify(radial_profile(FluxParams(p, delta), 20.0, 4001))
        assert np.all(env.env_values <= env.base.psi_values + 1e-12)
        assert np.all(np.diff(env.slopes) >= -1e-10)
        e = env.env_values
        assert np.all(e[1:-1] <= 0.5 * (e[:-2] + e[2:]) + 1e-9)


class TestHullHelper:
    def test_drops_collinear(self):
        x = np.array([0.0, 1.0, 2.0, 3.0])
        np.testing.assert_array_equal(lower_hull_indices(x, x * 2), [0, 3])

    def test_bump(self):
        x = np.arange(5.0)
        y = np.array([0.0, 1.0, 5.0, 1.0, 0.0])
        np.testing.assert_array_equal(lower_hull_indices(x, y), [0, 4])


class TestStructure:
    def test_p2_scan(self):
        params = FluxParams(2.0, 0.1)
        prof = radial_profile(params)
        rep = verify_structure(prof, convexify(prof), params)
        assert rep.holds
        assert 0 < rep.gamma1 <= rep.gamma2
        # |Psi'(s)|/s = 1/(1+s^2) + delta reaches 1 + delta as s -> 0, so gamma2 >= 1 + delta
        s1 = prof.s_values[1]
        assert rep.gamma2 >= 1 / (1 + s1**2) + 0.1 - 1e-12
        assert rep.gamma2 == pytest.approx(1.1, rel=1e-3)
        assert rep.strict_lower_holds and rep.shifted_lower_holds

    def test_single_candidate(self):
        params = FluxParams(2.0, 0.1)
        prof = radial_profile(params)
        rep = verify_structure(prof, convexify(prof), params, gamma_candidates=[1.0, 1.0])
        assert rep.gamma1 == rep.gamma2 == 1.0
        assert not rep.holds
        # gamma1 = 1 breaks s^2 <= Psi**(s) ~ 0.05 s^2 worst at the far end of the grid
        assert rep.worst_point == prof.s_max

    def test_p15(self):
        params = FluxParams(1.5, 0.3)
        prof = radial_profile(params)
        rep = verify_structure(prof, convexify(prof), params)
        assert rep.holds and 0 < rep.gamma1 <= rep.gamma2

    def test_bounds_hold_at_reported_constants(self):
        params = FluxParams(2.0, 0.05)
        prof = radial_profile(params)
        env = convexify(prof)
        rep = verify_structure(prof, env, params)
        s = prof.s_values[1:]
        g1, g2 = rep.gamma1, rep.gamma2
        psi = 0.5 * np.log1p(s**2) + 0.025 * s**2
        assert np.all(psi <= g2 * s**2 + 1 + 1e-12)
        assert np.all(np.maximum(g1 * s**2 - 1, 0) <= psi + 1e-12)
        assert np.all(g1 * s**2 <= env.env_values[1:] + 1e-12)
        assert np.all(np.abs(env.slopes[1:]) <= g2 * s + 1 + 1e-12)
