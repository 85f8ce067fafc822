"""Rate constants, bound curves, and trace verification."""

import dataclasses
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gfbsplit import (
    ErrorSchedule,
    GfbConfig,
    ProductPoint,
    ProxOracle,
    SmoothOracle,
    SplitProblem,
    Weights,
    alpha_of,
    apply_T,
    compute_constants,
    ergodic_bound_curve,
    estimate_fixed_point,
    pointwise_bound_curve,
    run,
    tau_of,
    verify_bounds,
    weighted_norm,
)
from conftest import builtin_1d_config


def test_alpha_of_values():
    assert alpha_of(1.0, 1.0) == pytest.approx(2.0 / 3.0)
    assert alpha_of(1e-12, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert alpha_of(3.0, 2.0) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        alpha_of(2.0, 1.0)
    with pytest.raises(ValueError):
        alpha_of(-0.1, 1.0)
    with pytest.raises(ValueError):
        alpha_of(1.0, 0.0)


def test_tau_of_values():
    alpha = 2.0 / 3.0
    assert tau_of(1.0, alpha) == pytest.approx(0.5)
    assert tau_of(0.75, alpha) == pytest.approx(0.5625)  # vertex
    assert tau_of(0.75, alpha) >= tau_of(1.4, alpha)
    assert tau_of(1.4999, alpha) == pytest.approx(0.0, abs=2e-4)
    with pytest.raises(ValueError):
        tau_of(1.5, alpha)
    with pytest.raises(ValueError):
        tau_of(0.0, alpha)
    with pytest.raises(ValueError):
        tau_of(0.5, 1.5)


def test_estimate_fixed_point_builtin(builtin_1d):
    cfg = builtin_1d_config(max_iters=100)
    z_star, quality = estimate_fixed_point(builtin_1d, cfg)
    assert z_star.block(0)[0] == pytest.approx(1.0, abs=1e-10)
    assert quality <= 1e-12


def test_estimate_fixed_point_from_converged_start(builtin_1d):
    cfg = builtin_1d_config(z0=ProductPoint(np.array([[1.0]])), block_shape=None)
    z_star, quality = estimate_fixed_point(builtin_1d, cfg)
    assert z_star.block(0)[0] == pytest.approx(1.0, abs=1e-12)
    assert quality <= 1e-12


def test_estimate_fixed_point_defect_matches_quality(small_pcp, small_pcp_zstar):
    _, _, problem, config = small_pcp
    z_star, quality = small_pcp_zstar
    defect = weighted_norm(apply_T(z_star, problem, config) - z_star,
                           config.weights)
    assert defect <= quality + 1e-15


def test_estimate_fixed_point_warns_on_low_quality(builtin_1d):
    cfg = builtin_1d_config(z0=ProductPoint(np.array([[-50.0]])))
    with pytest.warns(RuntimeWarning, match="approximate"):
        estimate_fixed_point(builtin_1d, cfg, tol=1e-13, max_iters=1)


def builtin_report(builtin_1d, relaxation, mode, iters):
    cfg = builtin_1d_config(relaxation=relaxation, mode=mode, max_iters=iters,
                            stop_tol=None)
    trace, _ = run(builtin_1d, cfg)
    z_star, quality = estimate_fixed_point(builtin_1d, cfg)
    report = compute_constants(trace, z_star, cfg, problem=builtin_1d,
                               zstar_quality=quality)
    return cfg, trace, report


def test_exact_regime_constants_vanish(small_pcp, small_pcp_zstar,
                                       small_pcp_run_hist):
    _, _, problem, _ = small_pcp
    z_star, quality = small_pcp_zstar
    cfg, trace, _ = small_pcp_run_hist
    report = compute_constants(trace, z_star, cfg, problem=problem,
                               zstar_quality=quality)
    assert report.C1 == 0.0 and report.C2 == 0.0 and report.C3 == 0.0
    assert report.certified is True
    assert report.d0 == pytest.approx(
        weighted_norm(trace.z0 - z_star, cfg.weights))


def test_truncated_error_sum_with_tail_bound():
    # Translation prox keeps the iteration trivially stable while the
    # injected norms follow (j+1)^-2 exactly.
    oracle = ProxOracle(fn=lambda v, s: v - s * np.array([1.0, 0.5]), label="lin")
    problem = SplitProblem(
        smooth=SmoothOracle(gradient=lambda x: np.zeros_like(x), beta=1.0),
        simple_terms=(oracle,),
    )
    cfg = GfbConfig(
        gamma=1.0, weights=Weights.uniform(1), relaxation=0.9, mode="ergodic",
        errors=ErrorSchedule.power_decay(1.0, 2.0, seed=5), max_iters=2000,
        stop_tol=None, block_shape=(2,),
    )
    trace, _ = run(problem, cfg)
    assert_allclose(trace.eps_norm[:5], (np.arange(5) + 1.0) ** -2.0, rtol=1e-12)
    z_star = ProductPoint(np.zeros((1, 2)))
    report = compute_constants(trace, z_star, cfg, problem=problem)
    assert report.C3 == pytest.approx(0.9 * math.pi ** 2 / 6.0, abs=1e-4)
    assert report.C3 > report.C3_truncated
    assert report.tails_included


def test_d0_of_builtin_run(builtin_1d):
    _, _, report = builtin_report(builtin_1d, 1.0, "pointwise", 20)
    assert report.d0 == pytest.approx(1.0, abs=1e-10)


def test_pointwise_curve_first_point(builtin_1d):
    _, trace, report = builtin_report(builtin_1d, 1.0, "pointwise", 20)
    assert report.pointwise_case == "iii"
    assert report.C2 == 0.0
    assert pointwise_bound_curve(report, 0) == pytest.approx(math.sqrt(2.0),
                                                             rel=1e-9)
    assert trace.e_norm[0] <= pointwise_bound_curve(report, 0)


def test_pointwise_curve_homogeneous_in_d0(builtin_1d):
    _, _, report = builtin_report(builtin_1d, 1.0, "pointwise", 20)
    doubled = dataclasses.replace(report, d0=2.0 * report.d0)
    ks = np.arange(report.horizon)
    assert_allclose(pointwise_bound_curve(doubled, ks),
                    2.0 * pointwise_bound_curve(report, ks), rtol=1e-12)


def test_pointwise_curve_iteration_budget_scaling(builtin_1d):
    # Halving the squared bound requires doubling the iteration count.
    _, _, report = builtin_report(builtin_1d, 1.0, "pointwise", 1024)
    b = pointwise_bound_curve
    assert b(report, 511) ** 2 == pytest.approx(2.0 * b(report, 1023) ** 2,
                                                rel=1e-12)


def test_curve_with_inexactness_dominates_exact_curve(builtin_1d):
    _, _, report = builtin_report(builtin_1d, 1.0, "pointwise", 50)
    bumped = dataclasses.replace(report, C2=0.5)
    ks = np.arange(50)
    assert np.all(pointwise_bound_curve(bumped, ks)
                  >= pointwise_bound_curve(report, ks))


def test_ergodic_curve_examples(builtin_1d):
    _, trace, report = builtin_report(builtin_1d, 0.5, "ergodic", 1001)
    assert report.C3 == 0.0
    assert ergodic_bound_curve(report, 9) == pytest.approx(0.4, rel=1e-9)
    assert ergodic_bound_curve(report, 19) == pytest.approx(
        0.5 * ergodic_bound_curve(report, 9), rel=1e-9)
    ks = np.arange(1001)
    assert np.all(trace.ebar_norm <= ergodic_bound_curve(report, ks) + 1e-12)


def test_curve_log_log_slopes(builtin_1d):
    _, _, pw_report = builtin_report(builtin_1d, 1.0, "pointwise", 1001)
    _, _, erg_report = builtin_report(builtin_1d, 0.5, "ergodic", 1001)
    ks = np.arange(10, 1001)
    pw_slope = np.polyfit(np.log(ks), np.log(pointwise_bound_curve(pw_report, ks)), 1)[0]
    erg_slope = np.polyfit(np.log(ks), np.log(ergodic_bound_curve(erg_report, ks)), 1)[0]
    assert abs(pw_slope + 0.5) <= 0.01
    assert abs(erg_slope + 1.0) <= 0.01


def test_curves_reject_out_of_horizon_and_wrong_regime(builtin_1d):
    _, _, report = builtin_report(builtin_1d, 1.0, "pointwise", 20)
    with pytest.raises(ValueError, match="horizon"):
        pointwise_bound_curve(report, 20)
    with pytest.raises(ValueError, match="ergodic-rate hypothesis"):
        ergodic_bound_curve(report, 5)  # relaxation 1.0 is outside ]0, 1[


def test_verify_bounds_clean_run(builtin_1d):
    cfg, trace, report = builtin_report(builtin_1d, 1.0, "pointwise", 200)
    violations = verify_bounds(trace, report, cfg.gamma)
    assert violations == []
    assert report.violations == []


def test_verify_bounds_flags_falsified_distance(builtin_1d):
    cfg, trace, report = builtin_report(builtin_1d, 1.0, "pointwise", 200)
    falsified = dataclasses.replace(report, d0=report.d0 / 2.0)
    violations = verify_bounds(trace, falsified, cfg.gamma)
    assert violations
    assert any(v.quantity == "e_norm" for v in violations)


def test_verify_bounds_flags_tampered_certificate(builtin_1d):
    cfg, trace, report = builtin_report(builtin_1d, 1.0, "pointwise", 50)

    class Shim:
        e_norm = trace.e_norm
        ebar_norm = trace.ebar_norm
        g_residual = trace.g_residual + 10.0
        gbar_residual = trace.gbar_residual

    violations = verify_bounds(Shim(), report, cfg.gamma)
    assert violations and all(v.quantity == "g_residual" for v in violations)


def test_verify_bounds_checks_ergodic_run(builtin_1d):
    cfg, trace, report = builtin_report(builtin_1d, 0.5, "ergodic", 200)
    assert verify_bounds(trace, report, cfg.gamma) == []
    assert report.pointwise_case == "ii"  # bounded-schedule fallback applies


def test_nu1_replay_matches_retained_history(small_pcp):
    _, _, problem, config = small_pcp
    base = dict(gamma=config.gamma, weights=config.weights, relaxation=1.0,
                errors=ErrorSchedule.power_decay(1e-2, 2.5, seed=9),
                max_iters=60, stop_tol=None, block_shape=config.block_shape)
    cfg_hist = GfbConfig(retain_history=True, **base)
    cfg_lean = GfbConfig(retain_history=False, **base)
    trace_hist, _ = run(problem, cfg_hist)
    trace_lean, _ = run(problem, cfg_lean)
    z_star, quality = estimate_fixed_point(problem, cfg_lean)
    rep_hist = compute_constants(trace_hist, z_star, cfg_hist, problem=problem)
    rep_lean = compute_constants(trace_lean, z_star, cfg_lean, problem=problem)
    assert rep_hist.nu1_source == "retained history"
    assert rep_lean.nu1_source == "replay"
    assert rep_hist.nu1 == pytest.approx(rep_lean.nu1, rel=1e-12)
    rep_bound = compute_constants(trace_lean, z_star, cfg_lean, problem=None)
    assert rep_bound.nu1_source == "quasi-monotonicity bound"
    assert rep_bound.nu1 >= rep_lean.nu1 - 1e-12
