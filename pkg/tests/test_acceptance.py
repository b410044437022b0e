"""Acceptance suite: one test per stated performance criterion.

Each test exercises the full pipeline at the tolerances the package
promises in its README.  The suite is slower than the unit tests (about
fifteen minutes on one core, dominated by the disk-identity audit) and
fully deterministic: every random quantity runs on fixed counter-based
seeds, so a failure here is a real regression, not sampling noise.

Criterion 2 is split in two: the flagged violation of the claimed
one-sided tail bound at lambda = 1.0 passes, while the companion check
that the claim holds everywhere on [1.4, 10] fails honestly at 1.4 and
1.5 (the claimed constant is simply false there; the crossover sits
between 1.57 and 1.58).  See notes in the repository root for the
analysis.
"""

import math
import os

import numpy as np
import pytest

from bflab.census import BoxSpec, count_real_zeros_batch, jensen_audit
from bflab.comparison import (
    build_lattice,
    li_shao_bounds,
    orthant_probability_oracle,
)
from bflab.experiments import ExperimentConfig, fit_decay_exponent, run_experiment
from bflab.field import max_log_modulus, sphere_average_log
from bflab.multiindex import gaussian_tail_audit
from bflab.rare_events import (
    EventSpec,
    ForcingEventSpec,
    estimate_event_probability,
    forcing_event_log_probability,
    verify_forcing_implies_hole,
)
from bflab.sampling import (
    RngStreamSpec,
    StreamRole,
    TiltSpec,
    draw_batch,
    draw_coefficients,
    truncation_plan,
)

SEED = 20260821


def _real_hole_tilt(r: float) -> TiltSpec:
    # a gentle constant-coefficient shift; heavier tilts blow up the
    # weight variance at these only-moderately-rare probabilities
    return TiltSpec(kind="real_hole", m=1, radius=r, shift_alpha0=0.5, band_scale=1.0)


# -- criterion 1: orthant probability bracket ---------------------------------


def test_criterion_01_orthant_bracket():
    """Oracle estimates sit inside [2^-n, pairwise upper] on 12 lattices."""
    lattices = [build_lattice(1, r, 2.0) for r in (1, 2, 4, 6, 8, 10)]
    lattices += [build_lattice(1, r, 2.0, nonneg=True) for r in (2, 4, 6, 8, 10, 12)]
    sizes = sorted(len(lat.points) for lat in lattices)
    assert sizes == [1, 2, 3, 3, 4, 5, 5, 6, 7, 7, 9, 11]
    for lat in lattices:
        n = len(lat.points)
        lower, upper = li_shao_bounds(lat)
        assert lower == pytest.approx(-n * math.log(2.0), abs=1e-12)
        est = orthant_probability_oracle(
            lat.covariance, trials=10**6, seed=SEED, confidence=0.99
        )
        assert est.ci_high >= math.exp(lower) - 1e-12, (n, est.p, math.exp(lower))
        assert est.ci_low <= math.exp(upper) + 1e-12, (n, est.p, math.exp(upper))
    # exact two-point case, frozen against the closed form
    rho = math.exp(-4.0)
    two = orthant_probability_oracle(
        np.array([[1.0, rho], [rho, 1.0]]), trials=10, seed=0
    )
    assert two.p == pytest.approx(0.25 + math.asin(rho) / (2.0 * math.pi), abs=1e-12)
    assert two.p == pytest.approx(0.2529151874699309, abs=1e-12)


# -- criterion 2: claimed one-sided tail bound --------------------------------


def test_criterion_02a_tail_claim_flagged_at_one():
    """The claimed tail bound is flagged false at lambda = 1."""
    tail, _ = gaussian_tail_audit(1.0)
    assert tail.verdict is False
    assert tail.reference_value == pytest.approx(0.317311, abs=5e-7)
    assert tail.claimed_bound == pytest.approx(0.241971, abs=5e-7)
    assert tail.reference_value == pytest.approx(0.3173105078629141, abs=1e-15)


def test_criterion_02b_tail_claim_holds_on_grid():
    """Claimed tail bound on the lambda grid 1.4, 1.5, ..., 10.0.

    This records a genuine defect: the claimed constant is below the true
    two-sided tail until about 1.576, so the verdicts at 1.4 and 1.5 are
    violations and this test fails.  It is left red on purpose; weakening
    it would hide the defect.
    """
    violated = []
    for k in range(87):
        lam = round(1.4 + 0.1 * k, 1)
        tail, _ = gaussian_tail_audit(lam)
        if not tail.verdict:
            violated.append(lam)
    assert violated == [], f"claimed tail bound fails at lambda = {violated}"


# -- criterion 3: mean real-zero count ----------------------------------------


def test_criterion_03_mean_real_zero_count():
    """Mean zero count on [-5, 5] over 1e5 draws within 10/pi +/- 0.03."""
    plan = truncation_plan(1, 5.0)
    box = BoxSpec(m=1, half_width=5.0)
    total_trials = 10**5
    chunk = 2500
    total = 0.0
    uncertain = 0
    for start in range(0, total_trials, chunk):
        rows, _ = draw_batch(SEED, range(start, start + chunk), plan)
        counts, unc, _, _ = count_real_zeros_batch(rows, plan.degree, box)
        total += float(counts.sum())
        uncertain += int(np.sum(unc))
    mean = total / total_trials
    target = 10.0 / math.pi
    assert uncertain == 0
    assert abs(mean - target) <= 0.03, f"mean {mean:.4f} vs {target:.4f}"


# -- criterion 4: growth normalization ----------------------------------------


def test_criterion_04_growth_concentration():
    """Max log-modulus and circle average at r=5, both near r^2/2."""
    plan = truncation_plan(1, 5.0)
    max_vals = []
    avg_vals = []
    for trial in range(200):
        draw = draw_coefficients(
            RngStreamSpec(SEED, trial, StreamRole.COEFFICIENTS), plan
        )
        max_vals.append(max_log_modulus(draw, 5.0).value / 25.0)
        avg_vals.append(sphere_average_log(draw, 5.0).value / 25.0)
    assert 0.4 <= float(np.mean(max_vals)) <= 0.6
    assert 0.4 <= float(np.mean(avg_vals)) <= 0.6


# -- criterion 5: disk identity audit -----------------------------------------


def test_criterion_05_disk_identity_residuals():
    """Zero-modulus vs circle-average identity: residual <= 1e-3 on >=99%."""
    plan = truncation_plan(1, 3.0)
    passing = 0
    worst = 0.0
    for trial in range(1000):
        draw = draw_coefficients(
            RngStreamSpec(SEED, trial, StreamRole.COEFFICIENTS), plan
        )
        audit = jensen_audit(draw, 3.0)
        resid = abs(audit.residual)
        if not audit.degenerate and resid <= 1e-3:
            passing += 1
        else:
            worst = max(worst, resid)
    assert passing >= 990, f"{passing}/1000 within 1e-3; worst residual {worst:.2e}"


# -- criterion 6: forcing event implies hole ----------------------------------


def test_criterion_06_forcing_implies_hole():
    """Conditioned draws never produce a zero in the target region."""
    real = verify_forcing_implies_hole(
        ForcingEventSpec(variant="real", m=1, r=2.0), samples=10**4, master_seed=SEED
    )
    assert real.violations == 0
    assert real.uncertain == 0
    cplx = verify_forcing_implies_hole(
        ForcingEventSpec(variant="complex", m=1, r=2.0), samples=10**3, master_seed=SEED
    )
    assert cplx.violations == 0
    assert cplx.uncertain == 0


# -- criterion 7: hole probability sandwich -----------------------------------


def test_criterion_07_hole_probability_sandwich():
    """exp(forcing log-mass) <= p(real hole) <= 2 exp(pairwise upper)."""
    for r, sampler, trials in ((2.0, "plain", 10**6), (3.0, "plain", 10**6), (4.0, "tilted", 2 * 10**5)):
        event = EventSpec(kind="real_hole", m=1, r=r)
        tilt = _real_hole_tilt(r) if sampler == "tilted" else None
        est = estimate_event_probability(
            event, trials=trials, master_seed=SEED, sampler=sampler, tilt=tilt
        )
        lower = math.exp(
            forcing_event_log_probability(ForcingEventSpec(variant="real", m=1, r=r))
        )
        lat = build_lattice(1, r, 2.0, nonneg=True)
        _, upper = li_shao_bounds(lat)
        cap = 2.0 * math.exp(upper)
        assert est.ci_high >= lower, (r, est.p_hat, lower)
        assert est.ci_low <= cap, (r, est.p_hat, cap)
        assert est.p_hat <= cap + (est.ci_high - est.ci_low), (r, est.p_hat, cap)


# -- criterion 8: decay exponent fits -----------------------------------------


def _ladder(kind, settings):
    est = []
    for r, sampler, trials in settings:
        event = EventSpec(kind=kind, m=1, r=r)
        tilt = _real_hole_tilt(r) if sampler == "tilted" else None
        out = estimate_event_probability(
            event, trials=trials, master_seed=SEED, sampler=sampler, tilt=tilt
        )
        est.append((r, out.p_hat, out.ci_low, out.ci_high))
    return est


def test_criterion_08_exponent_fits():
    """Synthetic slopes to 1%; measured real and complex hole slopes."""
    radii = [1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
    for exponent, rate in [
        (1.0, lambda r: math.exp(-2.0 * r)),
        (2.0, lambda r: math.exp(-0.5 * r * r)),
        (4.0, lambda r: math.exp(-(r**4))),
    ]:
        synth = [(r, rate(r), rate(r) * (1 - 1e-7), rate(r) * (1 + 1e-7)) for r in radii]
        fit = fit_decay_exponent(synth)
        assert fit.slope == pytest.approx(exponent, rel=0.01)

    real_fit = fit_decay_exponent(
        _ladder(
            "real_hole",
            [
                (1.5, "plain", 10**5),
                (2.0, "plain", 10**5),
                (2.5, "plain", 10**5),
                (3.0, "plain", 10**5),
                (4.0, "tilted", 4 * 10**4),
                (5.0, "tilted", 4 * 10**4),
            ],
        )
    )
    assert 0.7 <= real_fit.slope <= 2.3, real_fit

    complex_fit = fit_decay_exponent(
        _ladder(
            "complex_hole",
            [
                (1.5, "plain", 10**5),
                (1.75, "plain", 3 * 10**5),
                (2.0, "plain", 12 * 10**5),
            ],
        )
    )
    assert complex_fit.slope - real_fit.slope >= 1.0, (complex_fit.slope, real_fit.slope)


# -- criterion 9: importance sampling unbiasedness ----------------------------


def test_criterion_09_tilted_plain_agreement():
    """Tilted and plain 99% intervals overlap in all 20 replicates."""
    event = EventSpec(kind="real_hole", m=1, r=1.5)
    tilt = _real_hole_tilt(1.5)
    agreeing = 0
    for seed in range(20):
        plain = estimate_event_probability(
            event, trials=4000, master_seed=seed, confidence=0.99
        )
        tilted = estimate_event_probability(
            event,
            trials=4000,
            master_seed=1000 + seed,
            confidence=0.99,
            sampler="tilted",
            tilt=tilt,
        )
        if plain.ci_low <= tilted.ci_high and tilted.ci_low <= plain.ci_high:
            agreeing += 1
    assert agreeing == 20, f"{agreeing}/20 replicate interval pairs overlap"


# -- criterion 10: determinism across worker counts ---------------------------


def test_criterion_10_worker_invariance(tmp_path, monkeypatch):
    """Identical configs give identical report and figure bytes."""
    outputs = {}
    for workers in ("1", "2"):
        monkeypatch.setenv("BFLAB_WORKERS", workers)
        cfg = ExperimentConfig(
            experiment="hole_ladder",
            r_values=(0.8, 1.3),
            trials=9000,
            master_seed=SEED,
            out=str(tmp_path / f"w{workers}"),
        )
        run_experiment(cfg)
        outputs[workers] = {
            "csv": (tmp_path / f"w{workers}.csv").read_bytes(),
            "png": (tmp_path / f"w{workers}_ladder.png").read_bytes(),
        }
    monkeypatch.delenv("BFLAB_WORKERS")
    assert outputs["1"]["csv"] == outputs["2"]["csv"]
    assert outputs["1"]["png"] == outputs["2"]["png"]
