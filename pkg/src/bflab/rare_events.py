"""Rare-event probability estimation for hole and crowding events.

Events are defined through the zero census (no real zeros on a box, no
complex zeros in a disk, zero count far from its typical value), estimated
by plain Monte Carlo or by importance sampling from the tilt families in
`sampling`, and accompanied by the machinery around the coefficient-space
forcing events: their exact log-probability, an exact-conditional-sampling
verifier that forced draws really produce holes, and a term-by-term audit
of the partial-sum inequality that forcing rests on.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special

from .census import (
    BoxSpec,
    hole_indicator_batch,
    real_hole_indicator,
    winding_count_batch,
)
from .field import circle_values, real_basis_matrix
from .intervals import weighted_mean_interval, wilson_interval
from .multiindex import (
    degree_count,
    enveloped_tail_bound,
    exponent_table,
    index_count,
)
from .sampling import (
    COMPLEX_BAND_FACTOR,
    REAL_BAND_FACTOR,
    CoefficientDraw,
    RngStreamSpec,
    StreamRole,
    TiltSpec,
    TruncationPlan,
    derive_stream,
    draw_batch,
    truncation_plan,
)

_CHUNK = 4096
_WORKER_ENV = "BFLAB_WORKERS"

_EVENT_KINDS = ("real_hole", "complex_hole", "overcrowd", "undercrowd")


def worker_count() -> int:
    """Worker processes to use; the environment variable wins."""
    raw = os.environ.get(_WORKER_ENV)
    if raw is None:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError(f"{_WORKER_ENV} must be >= 1, got {raw}")
    return n


@dataclass(frozen=True)
class EventSpec:
    """One rare event, resolvable by the census for any coefficient draw.

    kind real_hole: no real zeros on the box [0, r]^m (the box the forcing
    event controls).  kind complex_hole: no zeros in the complex disk of
    radius r (m = 1).  The crowding kinds ask for |count - center| >=
    delta * r^2 zeros in that disk; center defaults to r^2/2, the typical
    count.
    """

    kind: str
    m: int
    r: float
    delta: float = 0.0
    center: float | None = None
    grid_step: float = 0.05

    def __post_init__(self) -> None:
        if self.kind not in _EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ValueError("r must be positive and finite")
        if self.kind in ("overcrowd", "undercrowd"):
            # delta = 0 is allowed and makes the event vacuous
            if self.delta < 0:
                raise ValueError("crowding kinds need delta >= 0")
            if self.m != 1:
                raise ValueError("crowding counts are defined for m = 1")
        if self.kind == "complex_hole" and self.m != 1:
            raise ValueError("complex hole census is defined for m = 1")

    @property
    def crowding_center(self) -> float:
        return 0.5 * self.r * self.r if self.center is None else self.center


@dataclass(frozen=True)
class RareEventEstimate:
    """Probability estimate with provenance.

    hits is the weighted event mass (an integer count for plain
    sampling); p_hat and its interval treat census-uncertain draws as
    misses, and the pessimistic/optimistic pair brackets the truth by
    resolving every uncertain verdict against or in favour of the event.
    """

    trials: int
    hits: float
    p_hat: float
    ci_low: float
    ci_high: float
    uncertain_fraction: float
    p_pessimistic: float
    p_optimistic: float
    sampler: str
    master_seed: int
    trial_base: int
    plan_degree: int
    confidence: float


def crowding_indicator(count: int, r: float, delta: float, center: float | None = None) -> bool:
    """True when the zero count sits at least delta * r^2 from center.

    center defaults to r^2/2.  delta = 0 is vacuous: always True.
    """
    c = 0.5 * r * r if center is None else center
    return abs(count - c) >= delta * r * r


def _crowding_cells(event: EventSpec, winding: np.ndarray) -> np.ndarray:
    c = event.crowding_center
    return np.abs(winding - c) >= event.delta * event.r * event.r


def _event_indicators(values: np.ndarray, plan: TruncationPlan, event: EventSpec):
    """(hit, uncertain) boolean arrays for a batch of coefficient rows."""
    if event.kind == "real_hole":
        box = BoxSpec(
            m=event.m,
            half_width=event.r,
            grid_step=min(event.grid_step, event.r),
            nonneg=True,
        )
        if event.m == 1:
            return hole_indicator_batch(values, plan.degree, box)
        hits = np.zeros(len(values), dtype=bool)
        unc = np.zeros(len(values), dtype=bool)
        for i, row in enumerate(values):
            res = real_hole_indicator(CoefficientDraw(plan=plan, values=row), box)
            hits[i] = res.verdict == "hole"
            unc[i] = res.verdict == "uncertain"
        return hits, unc
    winding, unc = winding_count_batch(values, plan.degree, event.r)
    if event.kind == "complex_hole":
        return (winding == 0) & ~unc, unc
    return _crowding_cells(event, winding) & ~unc, unc


def _estimate_chunk(args):
    master_seed, start, count, plan, event, tilt = args
    values, log_weights = draw_batch(master_seed, range(start, start + count), plan, tilt)
    hit, unc = _event_indicators(values, plan, event)
    return hit, unc, log_weights


def _tilt_matches(event: EventSpec, tilt: TiltSpec) -> bool:
    if tilt.m != event.m or tilt.radius != event.r:
        return False
    if event.kind in ("real_hole", "complex_hole"):
        return tilt.kind == event.kind
    # a disk emptied of zeros is the extreme undercrowding, so that tilt
    # family is the one that helps; overcrowding has no tilt here
    return event.kind == "undercrowd" and tilt.kind == "complex_hole"


def estimate_event_probability(
    event: EventSpec,
    trials: int,
    master_seed: int,
    sampler: str = "plain",
    tilt: TiltSpec | None = None,
    trial_base: int = 0,
    confidence: float = 0.95,
) -> RareEventEstimate:
    """Monte Carlo estimate of the event probability.

    Trials use the per-trial coefficient streams for master_seed, ids
    trial_base .. trial_base + trials - 1, split into fixed 4096-wide
    chunks whose results merge in trial order, so the estimate is a pure
    function of (event, trials, master_seed, trial_base) whatever the
    worker count.  sampler "tilted" requires a tilt matched to the event
    kind and geometry and corrects by the exact likelihood ratio.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if sampler not in ("plain", "tilted"):
        raise ValueError(f"unknown sampler {sampler!r}")
    if sampler == "tilted":
        if tilt is None:
            raise ValueError("tilted sampling needs a tilt")
        if not _tilt_matches(event, tilt):
            raise ValueError(
                f"tilt (kind={tilt.kind}, m={tilt.m}, r={tilt.radius}) does not "
                f"match event (kind={event.kind}, m={event.m}, r={event.r})"
            )
    else:
        tilt = None
    plan = truncation_plan(event.m, event.r)

    tasks = [
        (master_seed, start, min(_CHUNK, trial_base + trials - start), plan, event, tilt)
        for start in range(trial_base, trial_base + trials, _CHUNK)
    ]
    workers = min(worker_count(), len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_estimate_chunk, tasks))
    else:
        parts = [_estimate_chunk(t) for t in tasks]
    hit = np.concatenate([p[0] for p in parts])
    unc = np.concatenate([p[1] for p in parts])
    log_weights = np.concatenate([p[2] for p in parts])

    certain_hit = hit & ~unc
    if tilt is None:
        hits = int(certain_hit.sum())
        n_unc = int(unc.sum())
        p_hat = hits / trials
        ci_low, ci_high = wilson_interval(hits, trials, confidence)
        p_pess = p_hat
        p_opt = (hits + n_unc) / trials
    else:
        weights = np.exp(log_weights)
        summands = weights * certain_hit
        p_hat, ci_low, ci_high = weighted_mean_interval(summands, confidence)
        hits = float(summands.sum())
        p_pess = p_hat
        p_opt = float(np.mean(weights * (certain_hit | unc)))
    return RareEventEstimate(
        trials=trials,
        hits=hits,
        p_hat=float(p_hat),
        ci_low=float(ci_low),
        ci_high=float(min(ci_high, 1.0) if tilt is None else ci_high),
        uncertain_fraction=float(unc.mean()),
        p_pessimistic=float(p_pess),
        p_optimistic=float(p_opt),
        sampler="plain" if tilt is None else "tilted",
        master_seed=master_seed,
        trial_base=trial_base,
        plan_degree=plan.degree,
        confidence=confidence,
    )


# -- coefficient-space forcing events -----------------------------------------


@dataclass(frozen=True)
class ForcingEventSpec:
    """Explicit coefficient conditions that force a hole.

    variant "real": every coefficient with |j| <= cutoff (cutoff =
    ceil(48 m r^2)) is at least threshold, and beyond the cutoff
    |alpha_j| <= 2^{|j|/2}; the field is then >= 1 on [0, r]^m.  variant
    "complex": |alpha_0| >= threshold, the band 1 <= |j| <= cutoff
    (ceil(24 m r^2)) is squeezed to |alpha_j| <= band_bound, the same
    envelope holds beyond, and |psi| >= 1/2 on the closed complex ball of
    radius r.  threshold defaults to E_m + 1 where E_m is the enveloped
    tail constant; band_bound defaults to exp(-(1 + m/2) r^2).
    """

    variant: str
    m: int
    r: float
    threshold: float | None = None
    band_bound: float | None = None

    def __post_init__(self) -> None:
        if self.variant not in ("real", "complex"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError("r must be nonnegative and finite")

    @property
    def cutoff(self) -> int:
        factor = REAL_BAND_FACTOR if self.variant == "real" else COMPLEX_BAND_FACTOR
        return math.ceil(factor * self.m * self.r**2)

    @property
    def threshold_value(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return enveloped_tail_bound(self.m) + 1.0

    @property
    def band_bound_value(self) -> float:
        if self.band_bound is not None:
            return self.band_bound
        return math.exp(-(1.0 + self.m / 2.0) * self.r**2)


def _log_two_sided_mass(bound: float) -> float:
    """log P(|alpha| <= bound) for a standard Gaussian alpha."""
    if bound <= 0:
        return -math.inf
    if bound < 1e-8:
        # erf(x) ~ 2x/sqrt(pi) for small x
        return math.log(bound) + 0.5 * math.log(2.0 / math.pi)
    return math.log1p(-float(special.erfc(bound / math.sqrt(2.0))))


def _log_envelope_tail(m: int, first_degree: int) -> float:
    """Sum of count_d * log P(|alpha| <= 2^{d/2}) over degrees >= first.

    The terms die double-exponentially; summation stops when a term
    underflows, which certifies the remainder far below 1e-12.
    """
    total = 0.0
    d = first_degree
    while True:
        if d >= 128:
            # the mass defect erfc(2^{d/2 - 1/2}) underflows double precision
            # by degree 24 already; past here every term is exactly zero
            break
        term = degree_count(m, d) * _log_two_sided_mass(2.0 ** (0.5 * d))
        total += term
        if term == 0.0 or abs(term) < 1e-18:
            break
        d += 1
    return total


def forcing_event_log_probability(spec: ForcingEventSpec) -> float:
    """Exact log-probability of the forcing event.

    All conditions are on independent coordinates, so the result is a sum
    of one-coordinate Gaussian log-masses plus the convergent envelope
    product over all higher degrees.
    """
    t = spec.threshold_value
    if spec.variant == "real":
        n_band = index_count(spec.m, spec.cutoff)
        total = n_band * float(special.log_ndtr(-t))
        return total + _log_envelope_tail(spec.m, spec.cutoff + 1)
    # P(|alpha_0| >= t) is 1 for t <= 0, else 2 P(alpha >= t)
    total = 0.0 if t <= 0 else math.log(2.0) + float(special.log_ndtr(-t))
    b = spec.band_bound_value
    for d in range(1, spec.cutoff + 1):
        total += degree_count(spec.m, d) * _log_two_sided_mass(b)
    return total + _log_envelope_tail(spec.m, spec.cutoff + 1)


def _upper_tail_quantile(u: np.ndarray, threshold: float) -> np.ndarray:
    """Exact inverse-CDF sample of alpha | alpha >= threshold."""
    log_q = float(special.log_ndtr(-threshold))
    return -special.ndtri_exp(log_q + np.log(np.maximum(u, 1e-300)))


def _two_sided_quantile(u: np.ndarray, bound: float) -> np.ndarray:
    """Exact inverse-CDF sample of alpha | |alpha| <= bound."""
    lo = float(special.ndtr(-bound))
    mass = 1.0 - 2.0 * lo
    if mass < 1e-12:
        # the conditional law is uniform to rounding accuracy
        return bound * (2.0 * u - 1.0)
    return special.ndtri(lo + u * mass)


def _conditioned_rows(spec: ForcingEventSpec, plan: TruncationPlan, master_seed, trial_ids):
    """Draw coefficient rows conditioned on the forcing event."""
    degs = exponent_table(plan.m, plan.degree).sum(axis=1)
    n = plan.n_coefficients
    rows = np.empty((len(trial_ids), n))
    t = spec.threshold_value
    cut = spec.cutoff
    in_band = degs <= cut
    tail_bounds = 2.0 ** (0.5 * degs)
    for i, trial in enumerate(trial_ids):
        gen = derive_stream(RngStreamSpec(master_seed, trial, StreamRole.ORACLE))
        u = np.maximum(gen.random(n + 1), 1e-300)
        row = np.empty(n)
        if spec.variant == "real":
            row[in_band] = _upper_tail_quantile(u[:-1][in_band], t)
        else:
            sign = np.where(u[-1] < 0.5, -1.0, 1.0)
            row[0] = sign * _upper_tail_quantile(u[:1], t)[0]
            b = spec.band_bound_value
            mid = in_band & (degs >= 1)
            row[mid] = _two_sided_quantile(u[:-1][mid], b)
        outside = ~in_band
        for d in np.unique(degs[outside]):
            sel = outside & (degs == d)
            row[sel] = _two_sided_quantile(u[:-1][sel], float(2.0 ** (0.5 * d)))
        rows[i] = row
    return rows


@dataclass(frozen=True)
class ForcingVerification:
    """Outcome of the forced-draw hole check."""

    variant: str
    m: int
    r: float
    samples: int
    violations: int
    uncertain: int


def verify_forcing_implies_hole(
    spec: ForcingEventSpec, samples: int, master_seed: int
) -> ForcingVerification:
    """Draw coefficient rows conditioned on the forcing event and census
    each one.

    Conditioning is exact (inverse-CDF per coordinate, no rejection), so
    every sample is a genuine draw from the conditional law.  A forced
    draw with zeros in the target region is a violation; census verdicts
    that stay uncertain after refinement are tallied separately.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if spec.r == 0.0:
        return ForcingVerification(spec.variant, spec.m, spec.r, samples, 0, 0)
    plan = truncation_plan(spec.m, spec.r)
    rows = _conditioned_rows(spec, plan, master_seed, range(samples))
    if spec.variant == "real":
        box = BoxSpec(m=spec.m, half_width=spec.r, nonneg=True)
        if spec.m == 1:
            hole, unc = hole_indicator_batch(rows, plan.degree, box)
        else:
            hole = np.zeros(samples, dtype=bool)
            unc = np.zeros(samples, dtype=bool)
            for i in range(samples):
                res = real_hole_indicator(CoefficientDraw(plan=plan, values=rows[i]), box)
                hole[i] = res.verdict == "hole"
                unc[i] = res.verdict == "uncertain"
    else:
        if spec.m != 1:
            raise ValueError("complex-variant verification is defined for m = 1")
        winding, unc = winding_count_batch(rows, plan.degree, spec.r)
        hole = (winding == 0) & ~unc
    violations = int((~hole & ~unc).sum())
    return ForcingVerification(
        variant=spec.variant,
        m=spec.m,
        r=spec.r,
        samples=samples,
        violations=violations,
        uncertain=int(unc.sum()),
    )


@dataclass(frozen=True)
class ChainAudit:
    """The two partial sums behind the forcing argument, plus the slack.

    For the real variant: sum1 is the grid minimum of the in-band series
    (everything with |j| <= cutoff), sum2 the grid maximum modulus of the
    drawn tail plus the certified remainder, and margin = sum1 - sum2 - 1
    (the field was claimed >= 1).  For the complex variant: sum1 is the
    circle maximum modulus of the squeezed band, sum2 as before, margin =
    |alpha_0| - sum1 - sum2 - 1/2.  sum2_within_envelope records
    sum2 <= E_m; sum1_within_half records sum1 <= 1/2 for the complex
    variant (None for real, where no such bound is claimed).
    """

    variant: str
    sum1: float
    sum2: float
    margin: float
    tail_constant: float
    sum2_within_envelope: bool = True
    sum1_within_half: bool | None = None


def _check_membership(draw: CoefficientDraw, spec: ForcingEventSpec) -> None:
    degs = exponent_table(draw.m, draw.degree).sum(axis=1)
    vals = draw.values
    slack = 1.0 + 1e-12
    t = spec.threshold_value
    cut = spec.cutoff
    if spec.variant == "real":
        bad = (degs <= cut) & (vals < t / slack)
        if bad.any():
            raise ValueError(
                f"draw is not in the forcing event: coefficient {int(np.argmax(bad))} "
                f"is below the threshold {t}"
            )
    else:
        if abs(vals[0]) < t / slack:
            raise ValueError(
                f"draw is not in the forcing event: |alpha_0| = {abs(vals[0])} < {t}"
            )
        b = spec.band_bound_value * slack
        bad = (degs >= 1) & (degs <= cut) & (np.abs(vals) > b)
        if bad.any():
            raise ValueError(
                f"draw is not in the forcing event: band coefficient "
                f"{int(np.argmax(bad))} exceeds {spec.band_bound_value}"
            )
    tail_bad = (degs > cut) & (np.abs(vals) > slack * 2.0 ** (0.5 * degs))
    if tail_bad.any():
        raise ValueError(
            f"draw is not in the forcing event: tail coefficient "
            f"{int(np.argmax(tail_bad))} escapes the envelope"
        )


def sum_chain_audit(draw: CoefficientDraw, spec: ForcingEventSpec) -> ChainAudit:
    """Evaluate the forcing argument's partial sums on the actual draw.

    Membership in the forcing event is checked first (ValueError
    otherwise).  The audit reports sum1, sum2 and the margin of the final
    lower bound on the field; sum2 <= E_m must hold whenever the paperwork
    of the envelope is right, and the margin must be positive for the
    forcing logic to close.
    """
    if draw.m != spec.m:
        raise ValueError(f"draw dimension {draw.m} != spec dimension {spec.m}")
    _check_membership(draw, spec)
    plan = draw.plan
    degs = exponent_table(plan.m, plan.degree).sum(axis=1)
    cut = spec.cutoff
    e_m = enveloped_tail_bound(spec.m)

    if spec.variant == "real":
        box = BoxSpec(m=spec.m, half_width=spec.r, nonneg=True)
        axes = [box.axis_points()] * spec.m
        if spec.m == 1:
            basis = real_basis_matrix(plan.degree, axes[0])
            band_vals = np.where(degs <= cut, draw.values, 0.0) @ basis
            tail_vals = np.where(degs > cut, draw.values, 0.0) @ basis
        else:
            band_vals = _grid_series(draw, axes, degs <= cut)
            tail_vals = _grid_series(draw, axes, degs > cut)
        sum1 = float(band_vals.min())
        sum2 = float(np.abs(tail_vals).max()) + plan.tail_bound
        margin = sum1 - sum2 - 1.0
    else:
        if spec.m != 1:
            raise ValueError("complex-variant audit is defined for m = 1")
        n_nodes = 1 << max(12, int(math.ceil(math.log2(plan.degree + 1))))
        band_coeffs = np.where((degs >= 1) & (degs <= cut), draw.values, 0.0)
        tail_coeffs = np.where(degs > cut, draw.values, 0.0)
        band_circle = circle_values(band_coeffs, plan.degree, spec.r, n_nodes)[0]
        tail_circle = circle_values(tail_coeffs, plan.degree, spec.r, n_nodes)[0]
        sum1 = float(np.abs(band_circle).max())
        sum2 = float(np.abs(tail_circle).max()) + plan.tail_bound
        margin = abs(float(draw.values[0])) - sum1 - sum2 - 0.5
    return ChainAudit(
        variant=spec.variant,
        sum1=sum1,
        sum2=sum2,
        margin=margin,
        tail_constant=float(e_m),
        sum2_within_envelope=bool(sum2 <= e_m),
        sum1_within_half=None if spec.variant == "real" else bool(sum1 <= 0.5),
    )


def _grid_series(draw: CoefficientDraw, axes, mask: np.ndarray) -> np.ndarray:
    """Dense evaluation of a masked sub-series on an axis product grid."""
    plan = draw.plan
    exps = exponent_table(plan.m, plan.degree)
    inv = np.exp(-0.5 * special.gammaln(np.asarray(exps, dtype=np.float64) + 1.0).sum(axis=1))
    side = max(len(a) for a in axes)
    if side ** plan.m > 4_000_000:
        raise ValueError("audit grid too large")
    shape = tuple(len(a) for a in axes)
    out = np.zeros(shape)
    coeffs = np.where(mask, draw.values * inv, 0.0)
    # accumulate monomial by monomial; audits run on small grids
    pows = [np.vander(a, plan.degree + 1, increasing=True) for a in axes]
    for k in range(len(coeffs)):
        c = coeffs[k]
        if c == 0.0:
            continue
        term = c
        for axis_i in range(plan.m):
            term = np.multiply.outer(term, pows[axis_i][:, exps[k, axis_i]])
        out += term
    return out
