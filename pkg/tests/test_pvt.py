"""Position solver and displacement-bound checks."""

import itertools

import numpy as np
import pytest

from gpsentry.constants import GPS_ORBIT_RADIUS_M, SPEED_OF_LIGHT
from gpsentry.pvt import (GeometryError, GeometrySurvey, OffsetBoundReport,
                          compute_gdop, max_spoof_offset,
                          sample_constellation, solve_pvt, survey_geometries)

USER = np.array([-1_288_120.0, -4_720_100.0, 4_079_700.0])


def _shell_sats(seed=0, n=6):
    rng = np.random.default_rng(seed)
    sats = sample_constellation(n, rng)
    # place the ENU constellation around the test user position by
    # treating ENU as ECEF offsets; geometry quality is what matters
    return USER[None, :] + sats


def test_recovers_position_and_bias():
    sats = _shell_sats(1)
    bias = 8_500.0
    ranges = np.linalg.norm(sats - USER[None, :], axis=1) + bias
    sol = solve_pvt(sats, ranges)
    assert np.linalg.norm(sol.position_m - USER) < 1e-3
    assert sol.clock_bias_m == pytest.approx(bias, abs=1e-3)
    assert np.max(np.abs(sol.residuals_m)) < 1e-3
    assert sol.iterations <= 20
    assert sol.gdop == pytest.approx(compute_gdop(sats, sol.position_m),
                                     rel=1e-9)


def test_clock_bias_invariance():
    sats = _shell_sats(2)
    ranges = np.linalg.norm(sats - USER[None, :], axis=1)
    sol0 = solve_pvt(sats, ranges)
    sol1 = solve_pvt(sats, ranges + 123_456.0)
    assert np.linalg.norm(sol1.position_m - sol0.position_m) < 1e-3
    assert sol1.clock_bias_m - sol0.clock_bias_m == pytest.approx(
        123_456.0, abs=1e-3)


def test_needs_four_satellites():
    sats = _shell_sats(3)[:3]
    ranges = np.linalg.norm(sats - USER[None, :], axis=1)
    with pytest.raises(GeometryError):
        solve_pvt(sats, ranges)


def test_degenerate_geometry_raises():
    one = USER + np.array([0.0, 0.0, 2.0e7])
    sats = np.tile(one, (5, 1))
    ranges = np.linalg.norm(sats - USER[None, :], axis=1)
    with pytest.raises(GeometryError):
        solve_pvt(sats, ranges)


def test_residuals_capture_range_noise():
    sats = _shell_sats(4, n=8)
    rng = np.random.default_rng(10)
    noise = rng.normal(0.0, 3.0, size=8)
    ranges = np.linalg.norm(sats - USER[None, :], axis=1) + noise
    sol = solve_pvt(sats, ranges)
    # residuals are the projection of the noise off the model space
    assert np.std(sol.residuals_m) < 3.0 * 2.0
    assert np.linalg.norm(sol.position_m - USER) < 3.0 * sol.gdop * 4


def test_gdop_matches_direct_formula():
    sats = _shell_sats(5)
    h = np.empty((len(sats), 4))
    diff = sats - USER[None, :]
    rngs = np.linalg.norm(diff, axis=1)
    h[:, :3] = -diff / rngs[:, None]
    h[:, 3] = 1.0
    want = float(np.sqrt(np.trace(np.linalg.inv(h.T @ h))))
    assert compute_gdop(sats, USER) == pytest.approx(want, rel=1e-12)


def test_offset_bound_matches_corner_oracle():
    sats = _shell_sats(6)
    rep = max_spoof_offset(sats, USER, tau_max_ns=500.0)
    cap = SPEED_OF_LIGHT * 500e-9
    assert rep.range_cap_m == pytest.approx(cap)
    diff = sats - USER[None, :]
    rngs = np.linalg.norm(diff, axis=1)
    h = np.concatenate([-diff / rngs[:, None], np.ones((len(sats), 1))],
                       axis=1)
    pinv = np.linalg.inv(h.T @ h) @ h.T
    best = max(
        float(np.linalg.norm(pinv[:3] @ (cap * np.asarray(s))))
        for s in itertools.product((-1.0, 1.0), repeat=len(sats)))
    assert rep.max_offset_m == pytest.approx(best, rel=1e-12)
    assert len(rep.worst_signs) == len(sats)
    assert set(rep.worst_signs) <= {-1, 1}


def test_offset_bound_scales_linearly_with_tau():
    sats = _shell_sats(7)
    r1 = max_spoof_offset(sats, USER, tau_max_ns=500.0)
    r2 = max_spoof_offset(sats, USER, tau_max_ns=1000.0)
    assert r2.max_offset_m == pytest.approx(2.0 * r1.max_offset_m, rel=1e-9)


def test_bound_dominates_actual_spoofed_solutions():
    # solve with every corner of the offset cube and non-corner interior
    # draws; the solved displacement must respect the linearized bound
    sats = _shell_sats(8, n=5)
    truth = np.linalg.norm(sats - USER[None, :], axis=1)
    rep = max_spoof_offset(sats, USER, tau_max_ns=500.0)
    cap = rep.range_cap_m
    rng = np.random.default_rng(11)
    worst = 0.0
    for trial in range(40):
        if trial < 32:
            signs = np.array([(trial >> k) & 1 for k in range(5)],
                             dtype=float) * 2.0 - 1.0
            offs = cap * signs
        else:
            offs = rng.uniform(-cap, cap, size=5)
        sol = solve_pvt(sats, truth + offs)
        worst = max(worst, float(np.linalg.norm(sol.position_m - USER)))
    assert worst <= rep.max_offset_m * 1.02
    # and the bound is tight: some corner gets close to it
    assert worst >= rep.max_offset_m * 0.9


def test_constellation_respects_elevation_mask_and_shell():
    rng = np.random.default_rng(42)
    for _ in range(20):
        sats = sample_constellation(7, rng, min_elevation_deg=5.0)
        el = np.arcsin(sats[:, 2] / np.linalg.norm(sats, axis=1))
        assert np.all(el >= np.radians(5.0) - 1e-9)
        # geocentric distance of each satellite equals the orbit shell
        earth_center = np.array([0.0, 0.0, -6_371_000.0])
        dist = np.linalg.norm(sats - earth_center[None, :], axis=1)
        assert np.allclose(dist, GPS_ORBIT_RADIUS_M, rtol=1e-9)


def test_survey_is_reproducible_and_sane():
    s1 = survey_geometries(50, 7, seed=3)
    s2 = survey_geometries(50, 7, seed=3)
    assert s1 == s2
    assert isinstance(s1, GeometrySurvey)
    assert 1.0 < s1.gdop_median < 15.0
    assert s1.offset_median_m > 0.0
    assert s1.offset_p95_m >= s1.offset_median_m
    assert s1.offset_max_m >= s1.offset_p95_m
    # typical displacement bound for 500 ns stays in the hundreds of
    # meters, far under any gross-spoofing scale
    assert s1.offset_median_m < 2_000.0


def test_offset_report_type():
    sats = _shell_sats(9)
    rep = max_spoof_offset(sats, USER)
    assert isinstance(rep, OffsetBoundReport)
    assert rep.gdop == pytest.approx(compute_gdop(sats, USER), rel=1e-12)
