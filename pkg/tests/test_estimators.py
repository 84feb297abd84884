import math

import numpy as np
import pytest

from perclab.arms import ArmSpec
from perclab.connectivity import QuadSpec
from perclab.estimators import (
    DEFAULT_R_GRID,
    ArmRatio,
    BkReport,
    Estimate,
    ScalingRow,
    arm_ratio_ladder,
    cross_2R_R,
    estimate_arm,
    estimate_correlation_length,
    estimate_crossing,
    estimate_dense,
    estimate_f_j,
    estimate_nested,
    estimate_revealment,
    estimate_theta_proxy,
    fit_exponent,
    fkg_check,
    quasi_mult_table,
    quenched_bk_check,
    ratio_radii,
    russo_check,
    scaling_relation_report,
)
from perclab.pivotal import EventSpec
from perclab.regions import centered_rectangle, rectangle
from perclab.runner import SampleRunner


def test_default_grid():
    assert DEFAULT_R_GRID[0] == 2
    assert DEFAULT_R_GRID[2] == pytest.approx(4)
    assert len(DEFAULT_R_GRID) == 14
    assert DEFAULT_R_GRID[-1] == pytest.approx(2 * math.sqrt(2) ** 13, rel=1e-6)


def test_estimate_from_indicators(seed):
    est = Estimate.from_indicators([True, False, True, True], seed)
    assert est.value == 0.75
    assert est.stderr == pytest.approx(math.sqrt(0.75 * 0.25 / 4))
    assert est.n == 4


def test_estimate_from_values(seed):
    est = Estimate.from_values([1.0, 2.0, 3.0], seed)
    assert est.value == 2.0
    assert est.stderr == pytest.approx(1 / math.sqrt(3))
    assert Estimate.from_values([5.0], seed).stderr == 0.0


def test_cross_2R_R():
    quad = cross_2R_R(3)
    assert quad.region.bounds == (-6.0, -3.0, 6.0, 3.0)
    assert (quad.side_a, quad.side_b) == ("left", "right")


@pytest.mark.parametrize("p, expected", [(0.0, 0.0), (1.0, 1.0)])
def test_crossing_at_extreme_p(seed, p, expected):
    quad = QuadSpec.left_right(rectangle(0, 0, 4, 2))
    est = estimate_crossing(p, quad, 3, seed)
    assert est.value == expected
    assert est.stderr == 0.0
    assert est.n == 3
    assert 0 <= est.truncation_bound <= 1


def test_crossing_is_reproducible(seed):
    quad = QuadSpec.left_right(rectangle(0, 0, 4, 2))
    a = estimate_crossing(0.5, quad, 6, seed)
    b = estimate_crossing(0.5, quad, 6, seed, SampleRunner(1))
    assert (a.value, a.stderr) == (b.value, b.stderr)


def test_crossing_is_monotone_in_p(seed):
    # common random numbers: the same samples at every p
    quad = QuadSpec.left_right(rectangle(0, 0, 4, 4))
    values = [estimate_crossing(p, quad, 8, seed).value for p in (0.2, 0.5, 0.8)]
    assert values == sorted(values)


def test_crossing_input_checks(seed):
    quad = QuadSpec.left_right(rectangle(0, 0, 4, 2))
    with pytest.raises(ValueError):
        estimate_crossing(1.2, quad, 3, seed)
    with pytest.raises(ValueError):
        estimate_crossing(0.5, quad, 0, seed)


def test_arm_degenerate_is_one(seed):
    est = estimate_arm(0.5, ArmSpec(j=4, r=8, R=4), 10, seed)
    assert (est.value, est.stderr) == (1.0, 0.0)


def test_arm_at_extreme_p(seed):
    assert estimate_arm(1.0, ArmSpec(j=1, r=1, R=3), 2, seed).value == 1.0
    assert estimate_arm(0.0, ArmSpec(j=1, r=1, R=3), 2, seed).value == 0.0


def test_f_j_dominates_arm(seed):
    spec = ArmSpec(j=1, r=1, R=3)
    f = estimate_f_j(0.5, spec, 4, 1, seed)
    alpha = estimate_arm(0.5, spec, 4, seed)
    assert f.value >= alpha.value
    with pytest.raises(ValueError):
        estimate_f_j(0.5, spec, 4, -1, seed)


def test_nested_at_p_one(seed):
    event = EventSpec(quad=QuadSpec.left_right(centered_rectangle(2, 2)))
    est = estimate_nested(1.0, event, 2, 3, seed)
    assert (est.mean, est.second_moment, est.variance) == (1.0, 1.0, 0.0)
    assert est.variance_stderr == 0.0
    with pytest.raises(ValueError):
        estimate_nested(0.5, event, 1, 3, seed)
    with pytest.raises(ValueError):
        estimate_nested(0.5, EventSpec(arm=ArmSpec(j=1, r=2, R=2)), 2, 3, seed)


@pytest.mark.parametrize("tag", ["a", "b", "c", "d"])
def test_nested_moments_stay_in_order(seed, tag):
    event = EventSpec(quad=QuadSpec.left_right(centered_rectangle(2, 2)))
    est = estimate_nested(0.5, event, 2, 2, seed.child(tag))
    assert est.mean**2 <= est.second_moment <= est.mean
    assert est.variance >= 0
    assert est.variance == pytest.approx(est.second_moment - est.mean**2, abs=1e-12)


def test_correlation_length_at_p_one(seed):
    corr = estimate_correlation_length(1.0, 0.05, [1.0, 2.0], 2, seed)
    assert corr.L_hat == 1.0
    assert not corr.beyond_grid
    assert len(corr.curve) == 1


def test_correlation_length_input_checks(seed):
    with pytest.raises(ValueError):
        estimate_correlation_length(0.5, n=2, seed=seed)
    with pytest.raises(ValueError):
        estimate_correlation_length(0.7, 1.5, n=2, seed=seed)
    with pytest.raises(ValueError):
        estimate_correlation_length(0.7, 0.05, [2.0, 1.0], 2, seed)


def test_theta_proxy(seed):
    curve = estimate_theta_proxy(1.0, [2, 3], 2, seed)
    assert [R for R, _ in curve] == [2.0, 3.0]
    assert all(est.value == 1.0 for _, est in curve)
    curve = estimate_theta_proxy(0.5, [2, 3], 6, seed)
    assert curve[1][1].value <= curve[0][1].value


def test_quasi_mult_identity(seed):
    (record,) = quasi_mult_table(1, [(2, 2, 3)], 1.0, 2, seed)
    assert record.ratio == 1.0
    assert record.stderr == 0.0
    assert not record.undefined


def test_quasi_mult_undefined_at_p_zero(seed):
    (record,) = quasi_mult_table(1, [(1, 2, 3)], 0.0, 2, seed)
    assert record.undefined
    assert record.ratio is None
    with pytest.raises(ValueError):
        quasi_mult_table(1, [(3, 2, 1)], 0.5, 2, seed)


def test_fit_exponent_recovers_slope(seed):
    points = [
        (1.0, R, Estimate(value=R**-0.5, stderr=0.01 * R**-0.5, n=100, seed=seed))
        for R in (4.0, 8.0, 16.0, 32.0)
    ]
    fit = fit_exponent(points)
    assert fit.slope == pytest.approx(0.5)
    assert fit.intercept == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(fit.residuals(), 0.0, atol=1e-9)


def test_fit_exponent_drops_far_and_zero_points(seed):
    def est(value):
        return Estimate(value=value, stderr=0.01, n=100, seed=seed)

    points = [(1.0, R, est(R**-1.25)) for R in (4.0, 8.0, 16.0, 32.0)]
    points += [(1.0, 2.0, est(0.9)), (1.0, 64.0, est(0.0))]
    fit = fit_exponent(points)
    assert len(fit.points) == 4
    assert fit.slope == pytest.approx(1.25, rel=1e-6)
    with pytest.raises(ValueError):
        fit_exponent(points[:2])


def test_russo_input_checks(seed):
    with pytest.raises(ValueError):
        russo_check(0.01, 2, 0.02, 2, seed)
    with pytest.raises(ValueError):
        russo_check(0.5, 2, 0.0, 2, seed)


def test_russo_at_p_one_side(seed):
    report = russo_check(0.5, 1, 0.5, 2, seed)
    # p - dp = 0 has no crossing and p + dp = 1 always crosses
    assert report.finite_diff.value == pytest.approx(1.0)
    assert report.pivotal_sum.value >= 0


def test_scaling_report_input_checks(seed):
    with pytest.raises(ValueError):
        scaling_relation_report([0.8], n_budget=2, seed=seed)


def test_ratio_radii():
    assert ratio_radii(2) == [2]
    assert ratio_radii(5) == [2, 4, 5]
    assert ratio_radii(8) == [2, 4, 8]


def test_one_arm_ratio_is_at_least_one(seed):
    # coupled marks: the black one-arm event only gains samples as p grows
    ladder, (theta, alpha1, _) = arm_ratio_ladder(0.6, 4, 6, seed)
    assert [step.R for step in ladder] == [2, 4]
    assert theta.value >= alpha1.value
    assert all(step.alpha1_ratio is None or step.alpha1_ratio >= 1 for step in ladder)


def test_scaling_row_ladder_maxima(seed):
    row = ScalingRow(
        p=0.6,
        L_hat=5.0,
        beyond_grid=False,
        ladder=[
            ArmRatio(R=2, alpha1_ratio=1.5, alpha4_ratio=None),
            ArmRatio(R=4, alpha1_ratio=1.2, alpha4_ratio=0.8),
        ],
    )
    assert row.max_alpha1_ratio == 1.5
    assert row.max_alpha4_ratio == 0.8
    assert ScalingRow(p=0.6, L_hat=None, beyond_grid=True).max_alpha4_ratio is None


@pytest.mark.slow
def test_four_arm_ratio_stays_bounded(seed):
    ladder, _ = arm_ratio_ladder(0.6, 4, 300, seed)
    ratios = [step.alpha4_ratio for step in ladder if step.alpha4_ratio is not None]
    assert ratios
    assert max(ratios) <= 4.0


def test_revealment(seed):
    rect = centered_rectangle(2, 1)
    rev = estimate_revealment(0.5, rect, 3, 1.0, seed)
    assert all(0 < f <= 1 for f in rev.frequencies.values())
    assert rev.argmax is not None
    assert rev.argmax[1] * rev.rho <= 0.0
    assert 0 < rev.max.value <= 1
    with pytest.raises(ValueError):
        estimate_revealment(0.5, rect, 3, 0.0, seed)


def test_fkg_margin_is_exact_for_deterministic_events(seed):
    quad_a = QuadSpec.bottom_top(rectangle(-2, -2, -1, 2))
    quad_b = QuadSpec.bottom_top(rectangle(1, -2, 2, 2))
    report = fkg_check(1.0, quad_a, quad_b, 2, seed)
    assert (report.p_a.value, report.p_b.value, report.p_ab.value) == (1.0, 1.0, 1.0)
    assert report.margin == 0.0


def test_bk_check(seed):
    quad = QuadSpec.left_right(centered_rectangle(2, 2))
    report = quenched_bk_check(0.5, quad, 2, 4, seed)
    assert report.n_env == 2
    assert report.violations >= 0
    assert report.holds == (report.violations == 0)
    with pytest.raises(ValueError):
        quenched_bk_check(0.5, quad, 2, 1, seed)


def test_bk_report_flags(seed):
    def est(value, stderr=0.0):
        return Estimate(value=value, stderr=stderr, n=10, seed=seed)

    report = BkReport(
        n_env=10, n_color=10, violations=0, max_excess=0.0, annealed_a=est(0.5), annealed_aa=est(0.2)
    )
    assert report.holds and report.annealed_holds
    bad = report.model_copy(update={"violations": 1, "annealed_aa": est(0.4, 0.01)})
    assert not bad.holds and not bad.annealed_holds


def test_dense(seed):
    report = estimate_dense(0.9, 2, 2, seed)
    assert report.failure_bound == pytest.approx(0.9**-2 * math.exp(-((0.9 * 2) ** 2) / 2))
    assert 0 <= report.estimate.value <= 1
    with pytest.raises(ValueError):
        estimate_dense(1.0, 2, 2, seed)
