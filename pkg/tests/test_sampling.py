"""Tests for stream derivation, truncation plans, and tilted draws."""

import io
import math

import numpy as np
import pytest
from scipy import special

from bflab import sampling as sp
from bflab.multiindex import index_count


def make_spec(trial=0, seed=42, role=sp.StreamRole.COEFFICIENTS):
    return sp.RngStreamSpec(seed, trial, role)


class TestStreams:
    def test_identical_specs_identical_values(self):
        a = sp.derive_stream(make_spec()).standard_normal(64)
        b = sp.derive_stream(make_spec()).standard_normal(64)
        np.testing.assert_array_equal(a, b)

    def test_prefix_stability_across_lengths(self):
        short = sp.derive_stream(make_spec()).standard_normal(10)
        long = sp.derive_stream(make_spec()).standard_normal(4000)
        np.testing.assert_array_equal(long[:10], short)

    @pytest.mark.parametrize(
        "other",
        [
            dict(trial=1),
            dict(seed=43),
            dict(role=sp.StreamRole.QUADRATURE),
            dict(role=sp.StreamRole.ORACLE),
        ],
    )
    def test_distinct_specs_distinct_streams(self, other):
        base = sp.derive_stream(make_spec()).standard_normal(32)
        alt = sp.derive_stream(make_spec(**other)).standard_normal(32)
        assert not np.array_equal(base, alt)

    def test_stream_values_are_standard_normal(self):
        # CLT check on mean and variance of a large pooled sample
        vals = np.concatenate(
            [sp.derive_stream(make_spec(trial=t)).standard_normal(5000) for t in range(20)]
        )
        n = vals.size
        assert abs(vals.mean()) < 4 / math.sqrt(n)
        assert abs(vals.var() - 1.0) < 4 * math.sqrt(2.0 / n)

    def test_cross_trial_correlation_small(self):
        a = sp.derive_stream(make_spec(trial=0)).standard_normal(20000)
        b = sp.derive_stream(make_spec(trial=1)).standard_normal(20000)
        rho = np.corrcoef(a, b)[0, 1]
        assert abs(rho) < 4 / math.sqrt(a.size)

    def test_seed_range_validation(self):
        with pytest.raises(ValueError):
            sp.RngStreamSpec(-1, 0)
        with pytest.raises(ValueError):
            sp.RngStreamSpec(0, 2**64)


class TestTruncationPlan:
    def test_band_floor_examples(self):
        assert sp.truncation_plan(1, 2.0).degree == 192
        assert sp.truncation_plan(2, 2.0).degree == 384

    def test_degree_monotone_in_radius(self):
        assert sp.truncation_plan(1, 0.5).degree < sp.truncation_plan(1, 2.0).degree

    def test_tail_bound_below_epsilon(self):
        for r in [0.3, 0.8, 1.7]:
            plan = sp.truncation_plan(1, r, epsilon=1e-9)
            assert plan.tail_bound <= 1e-9
            assert plan.degree >= math.ceil(48 * r * r)

    def test_envelope_confidence_in_unit_interval(self):
        plan = sp.truncation_plan(1, 0.2)
        assert 0.9 < plan.envelope_confidence <= 1.0

    def test_tail_bound_certifies_discarded_sum(self):
        # brute force: worst-case enveloped tail between degree N and 4N
        # must sit under the certified bound
        m, r = 1, 0.6
        plan = sp.truncation_plan(m, r, epsilon=1e-6)
        n = plan.degree
        brute = sum(
            2.0 ** (d / 2.0) * r**d / math.sqrt(math.factorial(d)) for d in range(n + 1, 4 * n)
        )
        assert brute <= plan.tail_bound

    def test_hard_cap_enforced(self):
        with pytest.raises(ValueError):
            sp.truncation_plan(2, 40.0, hard_cap=10**5)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            sp.truncation_plan(0, 1.0)
        with pytest.raises(ValueError):
            sp.truncation_plan(1, -1.0)
        with pytest.raises(ValueError):
            sp.truncation_plan(1, 1.0, epsilon=2.0)


class TestDraws:
    def test_draw_shape_and_determinism(self):
        plan = sp.truncation_plan(1, 1.0)
        d1 = sp.draw_coefficients(make_spec(), plan)
        d2 = sp.draw_coefficients(make_spec(), plan)
        assert d1.values.shape == (plan.n_coefficients,)
        np.testing.assert_array_equal(d1.values, d2.values)
        assert d1.log_weight == 0.0

    def test_finer_plan_extends_coarser_draw(self):
        coarse = sp.truncation_plan(1, 0.5, epsilon=1e-6)
        fine = sp.TruncationPlan(
            m=1,
            radius=0.5,
            degree=4 * coarse.degree,
            tail_bound=0.0,
            envelope_confidence=1.0,
            epsilon=1e-6,
        )
        a = sp.draw_coefficients(make_spec(), coarse)
        b = sp.draw_coefficients(make_spec(), fine)
        np.testing.assert_array_equal(b.values[: a.values.size], a.values)

    def test_mean_shift(self):
        plan = sp.truncation_plan(1, 0.3, epsilon=1e-6)
        shift = np.linspace(0, 1, plan.n_coefficients)
        base = sp.draw_coefficients(make_spec(), plan)
        shifted = sp.draw_coefficients(make_spec(), plan, mean_shift=shift)
        np.testing.assert_allclose(shifted.values, base.values + shift, rtol=0, atol=0)

    def test_mean_shift_shape_checked(self):
        plan = sp.truncation_plan(1, 0.3, epsilon=1e-6)
        with pytest.raises(ValueError):
            sp.draw_coefficients(make_spec(), plan, mean_shift=np.ones(3))


class TestTiltedDraws:
    def test_identity_tilt_is_plain(self):
        plan = sp.truncation_plan(1, 1.0)
        tilt = sp.TiltSpec("real_hole", m=1, radius=1.0, shift_alpha0=0.0, band_scale=1.0)
        plain = sp.draw_coefficients(make_spec(), plan)
        tilted = sp.tilted_draw(make_spec(), plan, tilt)
        np.testing.assert_array_equal(plain.values, tilted.values)
        assert tilted.log_weight == 0.0

    def test_shift_moves_alpha0_above_threshold(self):
        # with shift 5 nearly every draw has alpha_0 >= 2.5 (= tail constant + 1 for m=1)
        plan = sp.truncation_plan(1, 1.0)
        tilt = sp.TiltSpec("real_hole", m=1, radius=1.0, shift_alpha0=5.0, band_scale=1.0)
        hits = 0
        trials = 2000
        for t in range(trials):
            d = sp.tilted_draw(make_spec(trial=t), plan, tilt)
            hits += d.alpha0 >= 2.5
        assert hits / trials > 0.99

    def test_log_weight_matches_density_ratio(self):
        plan = sp.truncation_plan(1, 0.5, epsilon=1e-6)
        tilt = sp.TiltSpec("real_hole", m=1, radius=0.5, shift_alpha0=1.3, band_scale=0.8)
        d = sp.tilted_draw(make_spec(trial=7), plan, tilt)
        s, sig = 1.3, 0.8
        cutoff_count = index_count(1, tilt.cutoff)
        expect = 0.5 * s * s - s * d.values[0]
        band = d.values[1:cutoff_count]
        expect += np.sum(0.5 * band * band * (1 / sig**2 - 1)) + band.size * math.log(sig)
        assert d.log_weight == pytest.approx(expect, rel=1e-12)

    def test_unbiasedness_of_weights(self):
        # E_proposal[exp(log_weight)] = 1 for a moderate tilt
        plan = sp.truncation_plan(1, 0.5, epsilon=1e-6)
        tilt = sp.TiltSpec("real_hole", m=1, radius=0.5, shift_alpha0=0.6, band_scale=0.9)
        w = np.array(
            [sp.tilted_draw(make_spec(trial=t), plan, tilt).log_weight for t in range(20000)]
        )
        w = np.exp(w)
        se = w.std(ddof=1) / math.sqrt(w.size)
        assert abs(w.mean() - 1.0) < 4 * se

    def test_complex_band_std_hits_half_mass(self):
        tilt = sp.TiltSpec("complex_hole", m=1, radius=1.0)
        bound = math.exp(-1.5)
        # P(|N(0, band_std^2)| <= bound) = 1/2 by construction
        p = special.erf(bound / tilt.band_std / math.sqrt(2))
        assert p == pytest.approx(0.5, abs=1e-12)
        assert tilt.cutoff == 24

    def test_tilt_validation(self):
        plan = sp.truncation_plan(1, 0.5, epsilon=1e-6)
        with pytest.raises(ValueError):
            sp.TiltSpec("real_hole", m=1, radius=0.5, band_scale=0.0)
        with pytest.raises(ValueError):
            sp.TiltSpec("real_hole", m=1, radius=0.5, shift_alpha0=-1.0)
        with pytest.raises(ValueError):
            sp.TiltSpec("bogus", m=1, radius=0.5)
        with pytest.raises(ValueError):
            sp.tilted_draw(make_spec(), plan, sp.TiltSpec("real_hole", m=2, radius=0.5))
        big = sp.TiltSpec("real_hole", m=1, radius=0.5, band_cutoff=10**6)
        with pytest.raises(ValueError):
            sp.tilted_draw(make_spec(), plan, big)


class TestBatch:
    def test_batch_rows_match_single_draws(self):
        plan = sp.truncation_plan(1, 0.5, epsilon=1e-6)
        tilt = sp.TiltSpec("real_hole", m=1, radius=0.5, shift_alpha0=0.5, band_scale=0.9)
        values, weights = sp.draw_batch(42, range(5), plan, tilt)
        for i in range(5):
            single = sp.tilted_draw(make_spec(trial=i), plan, tilt)
            np.testing.assert_array_equal(values[i], single.values)
            assert weights[i] == single.log_weight


class TestSerialization:
    def test_round_trip_exact(self):
        plan = sp.truncation_plan(1, 0.7, epsilon=1e-6)
        draw = sp.draw_coefficients(make_spec(trial=3), plan)
        text = sp.draw_to_text(draw)
        back = sp.draw_from_text(text)
        np.testing.assert_array_equal(back.values, draw.values)
        assert back.plan == draw.plan
        assert back.stream == draw.stream
        assert back.log_weight == draw.log_weight

    def test_file_round_trip(self, tmp_path):
        plan = sp.truncation_plan(1, 0.4, epsilon=1e-6)
        tilt = sp.TiltSpec("real_hole", m=1, radius=0.4, shift_alpha0=1.0, band_scale=0.7)
        draw = sp.tilted_draw(make_spec(trial=11), plan, tilt)
        path = tmp_path / "draw.txt"
        sp.save_draw(draw, path)
        back = sp.load_draw(path)
        np.testing.assert_array_equal(back.values, draw.values)
        assert back.log_weight == draw.log_weight

    def test_header_then_one_value_per_line(self):
        plan = sp.truncation_plan(1, 0.3, epsilon=1e-6)
        draw = sp.draw_coefficients(make_spec(), plan)
        lines = sp.draw_to_text(draw).strip().splitlines()
        header = [l for l in lines if l.startswith("#")]
        body = [l for l in lines if not l.startswith("#")]
        assert len(body) == plan.n_coefficients
        joined = " ".join(header)
        for key in ("m", "degree", "master_seed", "trial_id", "role"):
            assert key in joined
