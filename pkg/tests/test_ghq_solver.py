"""Collocation system, solver drivers, and strategy evaluation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pbpsolve import (
    ProblemParams,
    SignalingLevels,
    SolveReport,
    affine_optimal,
    collocation_pair,
    distinct_levels,
    eval_gamma1bar,
    eval_gamma2,
    expand_distinct_levels,
    residual_system,
    solve_signaling_levels,
    solved_pair,
    summarize_staircase,
)
from pbpsolve.errors import ConfigurationError
from pbpsolve.quadrature import build_hermite_rule


# ---------------------------------------------------------------------------
# residual vector
# ---------------------------------------------------------------------------

def test_residual_accepts_bundle_or_vector(bench_params, rule7, bench_report):
    t = bench_report.levels.levels
    from_bundle = residual_system(bench_report.levels)
    from_vector = residual_system(t, bench_params, rule7)
    assert np.array_equal(from_bundle, from_vector)


def test_residual_vanishes_at_solution(bench_report):
    f = residual_system(bench_report.levels)
    assert np.linalg.norm(f) <= bench_report.tol
    assert np.linalg.norm(f) == bench_report.residual_norm


def test_residual_negation_reversal_equivariance_is_bitwise(bench_params, rule7):
    rng = np.random.default_rng(2024)
    for _ in range(25):
        t = rng.normal(0.0, 8.0, rule7.order)
        f = residual_system(t, bench_params, rule7)
        f_mirror = residual_system(-t[::-1], bench_params, rule7)
        assert np.array_equal(f_mirror, -f[::-1])


def test_residual_equivariance_other_orders():
    p = ProblemParams(k=0.7, sigma=0.8, sigma_x=2.0)
    rng = np.random.default_rng(5)
    for order in (2, 3, 10):
        rule = build_hermite_rule(order)
        t = rng.normal(0.0, 3.0, order)
        f = residual_system(t, p, rule)
        assert np.array_equal(residual_system(-t[::-1], p, rule), -f[::-1])


def test_symmetric_vector_gives_antisymmetric_residual(bench_params, rule7):
    # an odd-symmetric level vector has an odd-symmetric residual, bitwise
    t = np.array([-21.0, -14.0, -7.0, 0.0, 7.0, 14.0, 21.0])
    f = residual_system(t, bench_params, rule7)
    assert np.array_equal(f, -f[::-1])
    assert f[3] == 0.0


# ---------------------------------------------------------------------------
# solver drivers
# ---------------------------------------------------------------------------

def test_both_starts_reach_the_same_benchmark_solution(bench_params, rule7, bench_report):
    from_affine = solve_signaling_levels(bench_params, rule7, init="affine", tol=1e-10)
    assert from_affine.converged and bench_report.converged
    assert from_affine.init == "affine" and bench_report.init == "quantizer"
    assert np.max(np.abs(np.sort(from_affine.levels.levels)
                         - np.sort(bench_report.levels.levels))) < 1e-8


def test_auto_start_records_which_side_won(bench_params, rule7):
    report = solve_signaling_levels(bench_params, rule7, init="auto", tol=1e-10)
    assert report.converged
    assert report.init in ("auto:affine", "auto:quantizer")


def test_no_iterate_reports_start_levels_exactly(bench_params, rule7):
    start = [0.0, 6.5, -6.5, 13.2, -13.2, 19.9, -19.9]
    report = solve_signaling_levels(bench_params, rule7, init=start, iterate=False)
    expected = expand_distinct_levels(start, bench_params, rule7)
    assert np.array_equal(report.levels.levels, expected)
    assert not report.converged
    assert report.iterations == 0
    assert report.residual_norm == np.linalg.norm(residual_system(report.levels))


def test_user_init_order_is_immaterial(bench_params, rule7):
    unordered = solve_signaling_levels(
        bench_params, rule7, init=[13.2, -6.5, 0.0, 19.9, -19.9, 6.5, -13.2],
        iterate=False,
    )
    ordered = solve_signaling_levels(
        bench_params, rule7, init=[-19.9, -13.2, -6.5, 0.0, 6.5, 13.2, 19.9],
        iterate=False,
    )
    assert np.array_equal(unordered.levels.levels, ordered.levels.levels)


def test_short_tread_list_expands_by_nearest(bench_params, rule7):
    report = solve_signaling_levels(
        bench_params, rule7, init=[-9.0, 11.0], iterate=False
    )
    assert np.array_equal(
        report.levels.levels,
        np.array([-9.0, -9.0, -9.0, -9.0, 11.0, 11.0, 11.0]),
    )


def test_quantizer_scale_controls_the_lattice(bench_params, rule7):
    outer = math.sqrt(2.0) * 5.0 * rule7.nodes[-1]
    base = solve_signaling_levels(bench_params, rule7, init="quantizer", iterate=False)
    assert base.levels.levels[-1] == pytest.approx(outer, abs=1e-12)
    assert np.unique(base.levels.levels) == pytest.approx(
        np.arange(-3, 4) * outer / 3.0, abs=1e-12
    )
    # a coarser lattice merges the two inner abscissas onto one rung
    coarse = solve_signaling_levels(
        bench_params, rule7, init="quantizer", iterate=False, quantizer_scale=1.3
    )
    delta = 1.3 * outer / 3.0
    rungs = np.unique(coarse.levels.levels)
    assert rungs.size == 5
    assert np.allclose(rungs / delta, np.round(rungs / delta), atol=1e-12)


@pytest.mark.parametrize("bad", ["nope", [], [np.nan, 1.0]])
def test_bad_initializations_are_rejected(bench_params, rule7, bad):
    with pytest.raises(ConfigurationError):
        solve_signaling_levels(bench_params, rule7, init=bad)


def test_nonpositive_tol_rejected(bench_params, rule7):
    with pytest.raises(ConfigurationError):
        solve_signaling_levels(bench_params, rule7, tol=0.0)


def test_solved_pair_requires_convergence(bench_params, rule7):
    stalled = solve_signaling_levels(
        bench_params, rule7, init=[0.0, 6.5, -6.5, 13.2, -13.2, 19.9, -19.9],
        iterate=False,
    )
    with pytest.raises(ConfigurationError):
        solved_pair(stalled)


def test_solve_report_consistency_is_enforced(bench_report):
    with pytest.raises(ConfigurationError):
        SolveReport(
            levels=bench_report.levels,
            residual_norm=1.0,
            iterations=1,
            converged=True,
            init="affine",
            tol=1e-12,
        )


# ---------------------------------------------------------------------------
# level bundles
# ---------------------------------------------------------------------------

def test_signaling_levels_validate_shape_and_finiteness(bench_params):
    with pytest.raises(ConfigurationError):
        SignalingLevels(np.zeros(6), 7, bench_params)
    with pytest.raises(ConfigurationError):
        SignalingLevels(np.array([0.0, np.inf, 0, 0, 0, 0, 0]), 7, bench_params)


def test_signaling_levels_are_read_only(bench_report):
    with pytest.raises(ValueError):
        bench_report.levels.levels[0] = 1.0


# ---------------------------------------------------------------------------
# strategy evaluation
# ---------------------------------------------------------------------------

def test_second_stage_constant_levels_give_constant_strategy(bench_params):
    levels = SignalingLevels(np.full(7, 3.25), 7, bench_params)
    ys = np.array([-11.0, 0.0, 0.5, 9.0])
    assert np.allclose(eval_gamma2(ys, levels), 3.25, atol=1e-12)


def test_second_stage_is_odd_and_scalar_aware(bench_report):
    # the solved levels carry a ~4e-12 asymmetry, so the origin value does too
    assert eval_gamma2(0.0, bench_report.levels) == pytest.approx(0.0, abs=1e-10)
    value = eval_gamma2(4.2, bench_report.levels)
    assert isinstance(value, float)
    assert eval_gamma2(-4.2, bench_report.levels) == pytest.approx(-value, abs=1e-10)


def test_second_stage_exactly_symmetric_levels_fix_the_origin(bench_params):
    bundle = SignalingLevels(
        np.array([-19.8, -12.8, -6.1, 0.0, 6.1, 12.8, 19.8]), 7, bench_params
    )
    assert eval_gamma2(0.0, bundle) == pytest.approx(0.0, abs=1e-12)


def test_second_stage_saturates_at_outer_level(bench_report):
    top = float(np.max(bench_report.levels.levels))
    far = top + 20.0 * bench_report.levels.params.sigma
    assert eval_gamma2(far, bench_report.levels) == pytest.approx(top, abs=1e-6)


def test_second_stage_rejects_mismatched_rule(bench_report):
    with pytest.raises(ConfigurationError):
        eval_gamma2(0.0, bench_report.levels, rule=build_hermite_rule(9))


def test_first_stage_fixes_origin(bench_report):
    assert eval_gamma1bar(0.0, bench_report.levels) == pytest.approx(0.0, abs=1e-8)


def test_first_stage_is_consistent_at_collocation_points(bench_report, bench_params, rule7):
    x0 = math.sqrt(2.0) * bench_params.sigma_x * rule7.nodes
    for x, level in zip(x0, bench_report.levels.levels):
        assert eval_gamma1bar(float(x), bench_report.levels) == pytest.approx(
            float(level), abs=1e-8
        )


def test_first_stage_batch_matches_scalar(bench_report, bench_pair):
    rng = np.random.default_rng(11)
    xs = rng.uniform(-15.0, 15.0, 50)
    batch = np.asarray(bench_pair.gamma1bar(xs), dtype=float)
    for x, b in zip(xs, batch):
        assert b == pytest.approx(eval_gamma1bar(float(x), bench_report.levels), abs=1e-10)


def test_first_stage_is_odd(bench_pair):
    xs = np.linspace(0.5, 14.5, 29)
    left = np.asarray(bench_pair.gamma1bar(-xs), dtype=float)
    right = np.asarray(bench_pair.gamma1bar(xs), dtype=float)
    assert np.max(np.abs(left + right)) < 1e-9


def test_collocation_pair_exposes_levels(bench_pair, bench_report):
    assert bench_pair.kind == "collocation"
    assert np.array_equal(bench_pair.levels, bench_report.levels.levels)


# ---------------------------------------------------------------------------
# staircase reporting
# ---------------------------------------------------------------------------

def test_staircase_summary_of_benchmark_solution(bench_pair, bench_params):
    summary = summarize_staircase(bench_pair, bench_params)
    assert summary.shape == "staircase"
    assert summary.steps == 7
    inner = sorted(summary.tread_values, key=abs)[:5]
    assert sorted(round(v, 1) for v in inner) == [-12.8, -6.1, 0.0, 6.1, 12.8]
    # outer tread means pick up the rising tail past the last collocation point
    assert sorted(summary.tread_values)[0] == pytest.approx(-19.8, abs=0.5)
    assert sorted(summary.tread_values)[-1] == pytest.approx(19.8, abs=0.5)
    assert len(summary.breakpoints) == 6
    assert np.all(np.diff(summary.breakpoints) > 0)
    # treads are nearly flat but carry the small characteristic within-step slope
    assert max(abs(s) for s in summary.tread_slopes) < 0.05


def test_staircase_summary_of_affine_pair_is_one_linear_tread(unit_params):
    pair = affine_optimal(unit_params)
    summary = summarize_staircase(pair, unit_params)
    assert summary.shape == "linear"
    assert summary.steps == 1
    assert summary.breakpoints == ()
    assert summary.line_slope == pytest.approx(pair.lam, abs=1e-10)
    assert summary.tread_slopes[0] == pytest.approx(pair.lam, abs=1e-10)
    assert summary.line_rms < 1e-10


def test_distinct_levels_of_benchmark(bench_report):
    reps = distinct_levels(bench_report.levels)
    assert reps.shape == (7,)
    assert np.max(np.abs(np.sort(reps) - np.sort(bench_report.levels.levels))) == 0.0


def test_distinct_levels_clusters_treads(bench_params):
    vec = np.array([-10.0, -10.0 + 1e-9, -10.0 + 2e-9, 0.0, 10.0, 10.0, 10.0 - 1e-9])
    bundle = SignalingLevels(np.sort(vec), 7, bench_params)
    reps = distinct_levels(bundle)
    assert reps == pytest.approx([-10.0, 0.0, 10.0], abs=1e-8)


def test_distinct_levels_constant_vector(bench_params):
    bundle = SignalingLevels(np.full(7, 2.0), 7, bench_params)
    assert distinct_levels(bundle).tolist() == [2.0]
