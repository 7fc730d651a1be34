import numpy as np
import pytest

from multidiscrete import streams
from multidiscrete.calibration import (
    CalibrationOptions,
    PairCalibration,
    calibrate_matrix,
    calibrate_pair,
    simulate_pair_corr,
    trajectories_csv,
)
from multidiscrete.collapse import collapse_margin
from multidiscrete.corr_bounds import ep_binary_bounds, gsc_bounds
from multidiscrete.exceptions import InfeasibleCorrelationError
from multidiscrete.marginals import MarginalSpec, truncate_support

from conftest import preset_plan


def cm(spec):
    return collapse_margin(truncate_support(spec))


GP1 = cm(MarginalSpec.gp(5.14, 0.6445))
GP5 = cm(MarginalSpec.gp(2, 0.365))


def test_options_validation():
    with pytest.raises(ValueError):
        CalibrationOptions(tolerance=0)
    with pytest.raises(ValueError):
        CalibrationOptions(n_binary=100)
    with pytest.raises(ValueError):
        CalibrationOptions(step_fraction=1.5)
    with pytest.raises(ValueError):
        CalibrationOptions.from_dict({"bogus": 1})
    o = CalibrationOptions(seed=7)
    assert CalibrationOptions.from_dict(o.to_dict()) == o


def test_zero_target_is_exact():
    r = calibrate_pair(GP1, GP5, 0.0, CalibrationOptions(), streams.derive(1, 2, 0, 1))
    assert r.converged and r.delta_b == 0.0 and r.iterations <= 1


def test_gp_pair_converges_and_generates_target():
    opts = CalibrationOptions()
    r = calibrate_pair(GP1, GP5, 0.2619, opts, streams.derive(2345, 2, 0, 4))
    assert r.converged
    assert abs(r.delta_star_c - 0.2619) <= opts.tolerance
    assert len(r.trajectory) == r.iterations
    got = simulate_pair_corr(GP1, GP5, r.delta_b, 1_000_000, streams.derive(9, 99))
    assert got == pytest.approx(0.2619, abs=0.005)


def test_delta_b_agrees_with_attenuation_oracle():
    # discrete correlation = delta_b * A_1 * A_2, so delta_b should sit near target / (A_1 A_2)
    r = calibrate_pair(GP1, GP5, 0.2619, CalibrationOptions(), streams.derive(5, 2, 0, 4))
    oracle = 0.2619 / (GP1.attenuation * GP5.attenuation)
    # calibration noise: sd of a correlation at n=1e5 is about 0.003 on the discrete scale
    assert r.delta_b == pytest.approx(oracle, abs=0.015)


def test_simulated_corr_matches_attenuation_identity():
    a = cm(MarginalSpec.nb(8, 0.45))
    b = cm(MarginalSpec.binomial(25, 0.45))
    for d in (-0.4, 0.3, 0.7):
        got = simulate_pair_corr(a, b, d, 1_000_000, streams.derive(int(10 * d) + 20, 99))
        assert got == pytest.approx(d * a.attenuation * b.attenuation, abs=0.004)


def test_target_above_gsc_rejected_before_iterating():
    s = streams.derive(3, 99)
    _, hi = gsc_bounds(GP1.source, GP5.source, 100_000, streams.derive(3, 98))
    with pytest.raises(InfeasibleCorrelationError):
        calibrate_pair(GP1, GP5, min(hi + 0.05, 0.99), CalibrationOptions(), s)


def test_attenuated_bound_rejects_unreachable_target():
    # trivariate example pair (2, 3): 0.71 needs a binary correlation above its bound
    a, b = cm(MarginalSpec.gp(40, 0.58)), cm(MarginalSpec.gp(4.6, 0.14))
    with pytest.raises(InfeasibleCorrelationError, match="needs binary correlation"):
        calibrate_pair(a, b, 0.71, CalibrationOptions(), streams.derive(1, 99))


def test_non_convergence_reported():
    opts = CalibrationOptions(tolerance=1e-7, max_iterations=3)
    r = calibrate_pair(GP1, GP5, 0.2, opts, streams.derive(1, 99))
    assert not r.converged and r.iterations == 3 and len(r.trajectory) == 3


def test_trajectory_update_direction_and_bounds():
    opts = CalibrationOptions(n_binary=10_000, tolerance=1e-4, max_iterations=12)
    for target in (0.25, -0.2):
        r = calibrate_pair(GP1, GP5, target, opts, streams.derive(8, 99))
        lo, hi = ep_binary_bounds(GP1.p_b, GP5.p_b)
        for (b0, c0), (b1, _) in zip(r.trajectory, r.trajectory[1:]):
            assert lo < b1 < hi
            if c0 < target:
                assert b1 > b0
            elif c0 > target:
                assert b1 < b0


def test_determinism():
    opts = CalibrationOptions(n_binary=20_000)
    a = calibrate_pair(GP1, GP5, 0.2, opts, streams.derive(4, 2, 0, 1))
    b = calibrate_pair(GP1, GP5, 0.2, opts, streams.derive(4, 2, 0, 1))
    assert a == b
    assert PairCalibration.from_dict(a.to_dict()) == a


def test_two_margin_matrix_no_repair():
    res = calibrate_matrix([GP1, GP5], np.array([[1, 0.2619], [0.2619, 1]]), CalibrationOptions())
    sigma_b, rep, pairs = res
    assert not rep.was_repaired
    assert sigma_b[0, 1] == pairs[0].delta_b == sigma_b[1, 0]


def test_identity_matrix():
    ms = [GP1, GP5, cm(MarginalSpec.nb(3, 0.33))]
    res = calibrate_matrix(ms, np.eye(3), CalibrationOptions())
    np.testing.assert_array_equal(res.sigma_b, np.eye(3))
    assert all(p.iterations <= 1 for p in res.pairs)


def test_workers_do_not_change_results():
    ms = [GP1, GP5, cm(MarginalSpec.nb(3, 0.33))]
    sigma = np.array([[1, 0.2, 0.1], [0.2, 1, 0.15], [0.1, 0.15, 1]])
    opts = CalibrationOptions(n_binary=20_000)
    serial = calibrate_matrix(ms, sigma, opts, workers=1)
    pooled = calibrate_matrix(ms, sigma, opts, workers=2)
    assert serial.pairs == pooled.pairs


def test_toeplitz_binomial_all_converge_small_repair():
    plan = preset_plan("binomial")
    assert len(plan.calibrations) == 10
    assert all(c.converged for c in plan.calibrations)
    assert plan.binary_repair.max_abs_change <= 0.01


def test_magnitude_and_sign_properties():
    tol = 0.001
    for base in ("gp", "nb", "mixed"):
        for c in preset_plan(base).calibrations:
            assert abs(c.delta_b) >= abs(c.delta_star) - 2 * tol
            if abs(c.delta_star) > 2 * tol:
                assert np.sign(c.delta_b) == np.sign(c.delta_star)


def test_trajectories_csv():
    r = calibrate_pair(GP1, GP5, 0.2, CalibrationOptions(n_binary=20_000), streams.derive(4, 99))
    text = trajectories_csv([r])
    lines = text.strip().split("\n")
    assert lines[0] == "i,j,iteration,delta_b,delta_star_c"
    assert len(lines) == 1 + r.iterations
