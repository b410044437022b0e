"""Tests for zero counting, hole verdicts, and the disk identity audit."""

import math

import numpy as np
import pytest

from bflab.census import (
    BoxSpec,
    CensusResult,
    complex_hole_indicator_batch,
    count_real_zeros_batch,
    hole_indicator_batch,
    jensen_audit,
    real_hole_indicator,
    real_zero_count,
    winding_count,
    zero_radii,
)
from bflab.multiindex import index_count
from bflab.sampling import (
    CoefficientDraw,
    RngStreamSpec,
    StreamRole,
    TruncationPlan,
    draw_batch,
    draw_coefficients,
    truncation_plan,
)


def manual_plan(m, radius, degree):
    return TruncationPlan(
        m=m, radius=radius, degree=degree, tail_bound=1.0, envelope_confidence=0.0, epsilon=1.0
    )


def poly_draw(monomial_coeffs, radius):
    """Draw whose series equals sum_k c_k x^k (values alpha_k = c_k sqrt(k!))."""
    c = np.asarray(monomial_coeffs, dtype=np.float64)
    values = c * np.array([math.sqrt(math.factorial(k)) for k in range(len(c))])
    return CoefficientDraw(plan=manual_plan(1, radius, len(c) - 1), values=values)


def from_roots(roots, radius):
    return poly_draw(np.polynomial.polynomial.polyfromroots(roots), radius)


class TestBoxSpec:
    def test_axis_points_symmetric(self):
        box = BoxSpec(m=1, half_width=2.0, grid_step=0.5)
        np.testing.assert_allclose(box.axis_points(), np.arange(-2.0, 2.5, 0.5))

    def test_axis_points_nonneg_hits_endpoint(self):
        box = BoxSpec(m=1, half_width=1.0, grid_step=0.3, nonneg=True)
        xs = box.axis_points()
        assert xs[0] == 0.0
        assert xs[-1] == 1.0
        assert np.all(np.diff(xs) > 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            BoxSpec(m=0, half_width=1.0)
        with pytest.raises(ValueError):
            BoxSpec(m=1, half_width=-1.0)
        with pytest.raises(ValueError):
            BoxSpec(m=1, half_width=1.0, grid_step=2.0)


class TestRealCount:
    def test_cubic_with_known_roots(self):
        roots = [-1.2, 0.3, 1.999]
        draw = from_roots(roots, 2.5)
        res = real_zero_count(draw, BoxSpec(m=1, half_width=2.5), want_roots=True)
        assert res.verdict == "counted"
        assert res.count == 3
        np.testing.assert_allclose(res.roots, sorted(roots), atol=1e-9)

    def test_zero_exactly_on_grid_node(self):
        draw = poly_draw([0.0, 1.0], 2.0)
        res = real_zero_count(draw, BoxSpec(m=1, half_width=2.0))
        assert res.count == 1
        assert res.verdict == "counted"

    def test_close_pair_inside_one_cell_is_recovered(self):
        # both roots sit inside the cell [0.50, 0.55]
        draw = from_roots([0.51, 0.52], 2.5)
        res = real_zero_count(draw, BoxSpec(m=1, half_width=2.5))
        assert res.count == 2
        assert res.verdict == "counted"
        assert res.refinement_depth >= 1

    def test_tangent_double_zero_counts_the_touch_point(self):
        # (x - 0.511)^2 touches zero without a sign change; the refinement
        # drives a midpoint onto the tangency and counts the location once
        draw = from_roots([0.511, 0.511], 2.0)
        res = real_zero_count(draw, BoxSpec(m=1, half_width=2.0))
        assert res.verdict == "counted"
        assert res.count == 1

    def test_near_tangency_without_real_zeros(self):
        draw = poly_draw([0.511**2 + 1e-9, -1.022, 1.0], 2.0)
        res = real_zero_count(draw, BoxSpec(m=1, half_width=2.0))
        assert res.verdict == "counted"
        assert res.count == 0

    def test_barely_split_pair_is_found_deep(self):
        # zeros at 0.511 +- sqrt(1e-9), far below the 0.05 grid
        draw = poly_draw([0.511**2 - 1e-9, -1.022, 1.0], 2.0)
        res = real_zero_count(draw, BoxSpec(m=1, half_width=2.0))
        assert res.verdict == "counted"
        assert res.count == 2
        assert res.refinement_depth >= 8

    def test_batch_matches_singles(self):
        plan = truncation_plan(1, 3.0)
        values, _ = draw_batch(40, range(10), plan)
        box = BoxSpec(m=1, half_width=3.0)
        counts, uncertain, _, _ = count_real_zeros_batch(values, plan.degree, box)
        assert uncertain.sum() == 0
        for row in range(10):
            single = real_zero_count(CoefficientDraw(plan=plan, values=values[row]), box)
            assert single.count == counts[row]

    def test_mean_count_density_smoke(self):
        # zero density on the line is 1/pi, so [-5, 5] sees 10/pi on average
        plan = truncation_plan(1, 5.0)
        values, _ = draw_batch(2024, range(2000), plan)
        counts, uncertain, _, _ = count_real_zeros_batch(
            values, plan.degree, BoxSpec(m=1, half_width=5.0)
        )
        assert uncertain.sum() == 0
        assert abs(counts.mean() - 10.0 / math.pi) < 0.15


class TestHoleIndicator:
    def test_constant_is_hole(self):
        draw = poly_draw([1.0], 2.0)
        res = real_hole_indicator(draw, BoxSpec(m=1, half_width=2.0, nonneg=True))
        assert res.verdict == "hole"

    def test_positive_quadratic_is_hole(self):
        draw = poly_draw([0.5, 0.0, 1.0], 2.0)
        res = real_hole_indicator(draw, BoxSpec(m=1, half_width=2.0))
        assert res.verdict == "hole"

    def test_sign_change_found(self):
        draw = poly_draw([-1.0, 0.0, 1.0], 2.0)
        res = real_hole_indicator(draw, BoxSpec(m=1, half_width=2.0))
        assert res.verdict == "zero_found"
        assert res.count == 2

    def test_batch_flags(self):
        rows = np.stack(
            [
                poly_draw([1.0, 0.0, 0.0], 2.0).values,
                poly_draw([-1.0, 0.0, 1.0], 2.0).values,
            ]
        )
        hole, uncertain = hole_indicator_batch(rows, 2, BoxSpec(m=1, half_width=2.0, nonneg=True))
        assert hole.tolist() == [True, False]
        assert uncertain.tolist() == [False, False]


class TestBoxVerdictMd:
    def test_constant_hole_m2(self):
        values = np.zeros(index_count(2, 8))
        values[0] = 1.0
        draw = CoefficientDraw(plan=manual_plan(2, 2.0, 8), values=values)
        res = real_hole_indicator(draw, BoxSpec(m=2, half_width=2.0, nonneg=True))
        assert res.verdict == "hole"

    def test_coordinate_plane_zero_found_symmetric(self):
        # psi = x1 flips sign across the plane x1 = 0
        values = np.zeros(index_count(2, 4))
        values[2] = 1.0  # graded-lex position of (1, 0)
        draw = CoefficientDraw(plan=manual_plan(2, 2.0, 4), values=values)
        res = real_hole_indicator(draw, BoxSpec(m=2, half_width=1.0))
        assert res.verdict == "zero_found"
        assert res.witness is not None and len(res.witness) == 2

    def test_shifted_coordinate_hole_nonneg(self):
        # psi = x1 + 0.1 stays positive on [0, 1]^2 with certified margin
        values = np.zeros(index_count(2, 4))
        values[0] = 0.1
        values[2] = 1.0
        draw = CoefficientDraw(plan=manual_plan(2, 2.0, 4), values=values)
        res = real_hole_indicator(draw, BoxSpec(m=2, half_width=1.0, nonneg=True))
        assert res.verdict == "hole"

    def test_boundary_zero_stays_uncertain(self):
        # psi = x1 is zero on a face of [0, 1]^2: no certification possible
        values = np.zeros(index_count(2, 4))
        values[2] = 1.0
        draw = CoefficientDraw(plan=manual_plan(2, 2.0, 4), values=values)
        res = real_hole_indicator(draw, BoxSpec(m=2, half_width=1.0, nonneg=True))
        assert res.verdict == "uncertain"


class TestWinding:
    def test_single_zero(self):
        draw = from_roots([0.5], 2.0)
        assert winding_count(draw, 1.0).count == 1
        assert winding_count(draw, 0.3).count == 0

    def test_real_cubic_with_conjugate_pair(self):
        # zeros at 0.3 and +-0.4i, all inside radius 0.5
        draw = poly_draw([-0.048, 0.16, -0.3, 1.0], 2.0)
        res = winding_count(draw, 0.5)
        assert res.verdict == "counted"
        assert res.count == 3

    def test_conjugate_pair_counts_two(self):
        draw = poly_draw([0.25, 0.0, 1.0], 2.0)
        assert winding_count(draw, 0.7).count == 2
        assert winding_count(draw, 0.3).count == 0

    def test_zero_pinned_on_circle_is_bumped(self):
        draw = from_roots([0.5], 2.0)
        res = winding_count(draw, 0.5)
        assert res.verdict == "counted"
        assert res.witness is not None

    def test_off_centre_contour(self):
        draw = from_roots([0.5], 2.0)
        res = winding_count(draw, 0.2, centre=0.45 + 0.0j)
        assert res.count == 1
        far = winding_count(draw, 0.2, centre=-0.5 + 0.0j)
        assert far.count == 0

    def test_batch_matches_singles(self):
        plan = truncation_plan(1, 1.5)
        values, _ = draw_batch(60, range(50), plan)
        hole, uncertain = complex_hole_indicator_batch(values, plan.degree, 1.5)
        assert uncertain.sum() == 0
        for row in range(50):
            draw = CoefficientDraw(plan=plan, values=values[row])
            res = winding_count(draw, 1.5)
            assert hole[row] == (res.count == 0)

    def test_validation(self):
        draw = from_roots([0.5], 2.0)
        with pytest.raises(ValueError):
            winding_count(draw, -1.0)


class TestZeroRadiiAndJensen:
    def test_radii_of_constructed_cubic(self):
        draw = poly_draw([-0.048, 0.16, -0.3, 1.0], 2.0)
        rad = zero_radii(draw, 0.6)
        np.testing.assert_allclose(rad, [0.3, 0.4, 0.4], atol=1e-7)

    def test_disk_identity_exact_poly(self):
        draw = poly_draw([-0.048, 0.16, -0.3, 1.0], 2.0)
        audit = jensen_audit(draw, 0.6)
        expected = math.log(0.6 / 0.3) + 2 * math.log(0.6 / 0.4)
        assert audit.lhs == pytest.approx(expected, abs=1e-7)
        assert audit.residual < 1e-6
        assert not audit.degenerate

    def test_disk_identity_random_draws(self):
        plan = truncation_plan(1, 3.0)
        for trial in range(5):
            draw = draw_coefficients(RngStreamSpec(70, trial, StreamRole.COEFFICIENTS), plan)
            audit = jensen_audit(draw, 3.0)
            assert audit.residual < 1e-3
            assert audit.zero_radii.size > 0

    def test_degenerate_centre_is_flagged(self):
        draw = poly_draw([0.0, 1.0], 2.0)
        audit = jensen_audit(draw, 1.0)
        assert audit.degenerate
