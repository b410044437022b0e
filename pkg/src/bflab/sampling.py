"""Reproducible Gaussian coefficient sampling.

Streams are counter-based: a (master_seed, trial_id, role) triple maps to
a Philox generator whose key is the (master_seed, trial_id) pair and whose
counter block is offset by the role.  Distinct triples therefore never
share output, draws for different trials can run in any order or in
parallel, and rerunning with the same seeds reproduces every variate
bit for bit.

A truncation plan fixes the finite degree N at which the series is cut.
The plan certifies two things about the discarded coefficients: a sup-norm
bound on the discarded tail assuming the envelope |alpha_j| <= 2^{|j|/2},
and the probability that an iid Gaussian tail actually obeys that envelope.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np
from scipy import special

from .multiindex import degree_count, index_count

# Half-width of the conditioning band, in units of m * radius^2, used by
# the hole-forcing events.  Truncation plans never cut below this so the
# same plan can serve both evaluation and event conditioning.
REAL_BAND_FACTOR = 48
COMPLEX_BAND_FACTOR = 24

# z with P(|N(0,1)| <= z) = 1/2; used to size the complex band proposal.
_HALF_MASS_Z = float(special.ndtri(0.75))


class StreamRole(Enum):
    COEFFICIENTS = "coefficients"
    QUADRATURE = "quadrature"
    ORACLE = "oracle"


_ROLE_COUNTER = {
    StreamRole.COEFFICIENTS: 1,
    StreamRole.QUADRATURE: 2,
    StreamRole.ORACLE: 3,
}


@dataclass(frozen=True)
class RngStreamSpec:
    """Value-like address of one reproducible variate stream."""

    master_seed: int
    trial_id: int
    role: StreamRole = StreamRole.COEFFICIENTS

    def __post_init__(self) -> None:
        for name in ("master_seed", "trial_id"):
            v = getattr(self, name)
            if not (0 <= v < 2**64):
                raise ValueError(f"{name} must fit in uint64, got {v}")


def derive_stream(spec: RngStreamSpec) -> np.random.Generator:
    """Generator for a stream spec.

    The role lands in the third counter word, so the three roles of one
    (master_seed, trial_id) pair use disjoint counter ranges of the same
    Philox key; different pairs use different keys.  The map from spec to
    stream is injective and no sequences overlap.
    """
    key = np.array([spec.master_seed, spec.trial_id], dtype=np.uint64)
    counter = np.array([0, 0, _ROLE_COUNTER[spec.role], 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


@dataclass(frozen=True)
class TruncationPlan:
    """Finite cut of the coefficient series, with certified tail control.

    tail_bound dominates sup_{|x| <= radius} of the discarded sum when the
    discarded coefficients obey |alpha_j| <= 2^{|j|/2}; the envelope holds
    with probability envelope_confidence.
    """

    m: int
    radius: float
    degree: int
    tail_bound: float
    envelope_confidence: float
    epsilon: float

    @property
    def n_coefficients(self) -> int:
        return index_count(self.m, self.degree)

    def band_degree(self, factor: int = REAL_BAND_FACTOR) -> int:
        """Conditioning-band cutoff ceil(factor * m * radius^2)."""
        return math.ceil(factor * self.m * self.radius**2)


def _certified_tail_bound(m: int, radius: float, degree: int) -> float:
    """Upper bound on sup |discarded sum| over the ball of that radius.

    Degree shell d contributes at most 2^{d/2} r^d sum_{|j|=d} 1/sqrt(j!),
    and Cauchy-Schwarz bounds the inner sum by sqrt(binom(d+m-1,m-1) m^d/d!).
    Past the band floor the shell ratio is below 0.29, so a geometric
    remainder closes the sum after finitely many explicit terms.
    """
    log_c = 0.5 * math.log(2.0) + math.log(radius) + 0.5 * math.log(m)
    total = 0.0
    d = degree + 1
    while True:
        log_a = 0.5 * math.log(degree_count(m, d)) + d * log_c - 0.5 * math.lgamma(d + 1)
        a = math.exp(log_a)
        ratio = radius * math.sqrt(2.0 * m) * math.sqrt((d + m) / (d + 1)) / math.sqrt(d + 1)
        if ratio < 0.5:
            remainder = a * ratio / (1.0 - ratio)
            if a == 0.0 or remainder <= 1e-16 * total or d > degree + 100000:
                # tiny inflation keeps the certificate above its own
                # floating-point summation error
                return (total + a + remainder) * (1.0 + 1e-9)
        total += a
        d += 1


def _envelope_log_confidence(m: int, degree: int) -> float:
    """log P(|alpha_j| <= 2^{|j|/2} for every discarded j), iid Gaussians."""
    log_conf = 0.0
    for d in range(degree + 1, degree + 200):
        tail = special.erfc(2.0 ** (d / 2.0) / math.sqrt(2.0))
        if tail == 0.0:
            break
        log_conf += degree_count(m, d) * math.log1p(-tail)
    return log_conf


def truncation_plan(
    m: int,
    radius: float,
    epsilon: float = 1e-9,
    hard_cap: int = 10**7,
) -> TruncationPlan:
    """Smallest certified plan for evaluation within the given radius.

    The degree never drops below ceil(48 m radius^2) so one plan covers
    both series evaluation and the conditioning band of the hole-forcing
    events; past that floor it grows until the certified tail bound sits
    below epsilon.
    """
    if m < 1:
        raise ValueError(f"dimension m must be >= 1, got {m}")
    if not (radius > 0 and math.isfinite(radius)):
        raise ValueError(f"radius must be positive and finite, got {radius}")
    if not (0 < epsilon < 1):
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")

    degree = max(1, math.ceil(REAL_BAND_FACTOR * m * radius**2))
    if index_count(m, degree) > hard_cap:
        raise ValueError(
            f"plan for m={m}, radius={radius} needs {index_count(m, degree)} "
            f"coefficients, above the hard cap {hard_cap}"
        )
    while True:
        tail = _certified_tail_bound(m, radius, degree)
        if tail <= epsilon:
            break
        degree += max(1, degree // 8)
        if index_count(m, degree) > hard_cap:
            raise ValueError(
                f"epsilon={epsilon} needs more than {hard_cap} coefficients "
                f"at m={m}, radius={radius}; raise hard_cap or epsilon"
            )
    log_conf = _envelope_log_confidence(m, degree)
    return TruncationPlan(
        m=m,
        radius=float(radius),
        degree=degree,
        tail_bound=tail,
        envelope_confidence=math.exp(log_conf),
        epsilon=float(epsilon),
    )


@dataclass(frozen=True)
class TiltSpec:
    """Importance-sampling proposal aimed at one rare-event family.

    kind "real_hole": the constant coefficient is shifted up by
    shift_alpha0 and every coefficient with 1 <= |j| <= band_cutoff is
    drawn with standard deviation band_scale.  kind "complex_hole": same
    shift on alpha_0, but the band standard deviation is
    band_scale * exp(-(1 + m/2) r^2) / z_{3/4}, so that a band coefficient
    lands inside the forcing-event bound with probability >= 1/2.
    """

    kind: str
    m: int
    radius: float
    shift_alpha0: float = 0.0
    band_scale: float = 1.0
    band_cutoff: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("real_hole", "complex_hole"):
            raise ValueError(f"unknown tilt kind {self.kind!r}")
        if self.shift_alpha0 < 0:
            raise ValueError("shift_alpha0 must be >= 0")
        if not (0 < self.band_scale <= 1):
            raise ValueError("band_scale must be in (0, 1]")
        if self.m < 1 or self.radius <= 0:
            raise ValueError("need m >= 1 and radius > 0")

    @property
    def cutoff(self) -> int:
        if self.band_cutoff is not None:
            return self.band_cutoff
        factor = REAL_BAND_FACTOR if self.kind == "real_hole" else COMPLEX_BAND_FACTOR
        return math.ceil(factor * self.m * self.radius**2)

    @property
    def band_std(self) -> float:
        if self.kind == "real_hole":
            return self.band_scale
        bound = math.exp(-(1.0 + self.m / 2.0) * self.radius**2)
        return self.band_scale * bound / _HALF_MASS_Z


@dataclass(frozen=True)
class CoefficientDraw:
    """One realisation of the truncated coefficient sequence.

    values follow the canonical graded-lex order of the plan's index set.
    log_weight is the exact log of d(target)/d(proposal) at this draw;
    it is 0.0 for plain draws, and for tilted draws
    E_proposal[exp(log_weight) 1_A] = P_target(A) for any event A.
    """

    plan: TruncationPlan
    values: np.ndarray
    log_weight: float = 0.0
    stream: RngStreamSpec | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (self.plan.n_coefficients,):
            raise ValueError(
                f"draw has {self.values.shape} values, plan wants "
                f"({self.plan.n_coefficients},)"
            )

    @property
    def m(self) -> int:
        return self.plan.m

    @property
    def degree(self) -> int:
        return self.plan.degree

    @property
    def alpha0(self) -> float:
        return float(self.values[0])


def draw_coefficients(
    stream: RngStreamSpec | np.random.Generator,
    plan: TruncationPlan,
    mean_shift: np.ndarray | None = None,
) -> CoefficientDraw:
    """Plain iid standard Gaussian draw for the plan's index set.

    Because variates are consumed in canonical order, the draw for a finer
    plan with the same stream extends this one coefficient for coefficient.
    mean_shift optionally adds a fixed offset vector to the coefficients;
    none of the certified bounds account for a shift, so the draw is then
    tagged with the shift but its tail certificates are the centred ones.
    """
    spec = stream if isinstance(stream, RngStreamSpec) else None
    gen = derive_stream(stream) if isinstance(stream, RngStreamSpec) else stream
    values = gen.standard_normal(plan.n_coefficients)
    if mean_shift is not None:
        shift = np.asarray(mean_shift, dtype=np.float64)
        if shift.shape != values.shape:
            raise ValueError(f"mean_shift shape {shift.shape} != {values.shape}")
        values = values + shift
    return CoefficientDraw(plan=plan, values=values, log_weight=0.0, stream=spec)


def _band_slice(plan: TruncationPlan, cutoff: int) -> slice:
    # indices with 1 <= |j| <= cutoff form a contiguous graded-lex block
    return slice(1, index_count(plan.m, min(cutoff, plan.degree)))


def tilted_draw(
    stream: RngStreamSpec | np.random.Generator,
    plan: TruncationPlan,
    tilt: TiltSpec,
) -> CoefficientDraw:
    """Draw from the tilt proposal, carrying the exact log likelihood ratio.

    alpha_0 ~ N(shift_alpha0, 1); band coefficients ~ N(0, band_std^2);
    everything past the band is standard.  The identity tilt (shift 0,
    band_scale 1, kind real_hole) reproduces plain sampling with
    log_weight exactly 0.
    """
    if tilt.m != plan.m:
        raise ValueError(f"tilt is for m={tilt.m}, plan for m={plan.m}")
    if tilt.cutoff > plan.degree:
        raise ValueError(
            f"tilt band cutoff {tilt.cutoff} exceeds plan degree {plan.degree}"
        )
    spec = stream if isinstance(stream, RngStreamSpec) else None
    gen = derive_stream(stream) if isinstance(stream, RngStreamSpec) else stream
    base = gen.standard_normal(plan.n_coefficients)
    values = base.copy()
    log_weight = 0.0

    shift = tilt.shift_alpha0
    values[0] = base[0] + shift
    if shift != 0.0:
        log_weight += float(0.5 * shift * shift - shift * values[0])

    sigma = tilt.band_std
    band = _band_slice(plan, tilt.cutoff)
    if sigma != 1.0:
        xs = sigma * base[band]
        values[band] = xs
        log_weight += float(
            np.sum(0.5 * xs * xs * (1.0 / (sigma * sigma) - 1.0)) + xs.size * math.log(sigma)
        )
    return CoefficientDraw(plan=plan, values=values, log_weight=log_weight, stream=spec)


def draw_batch(
    master_seed: int,
    trial_ids: Iterable[int],
    plan: TruncationPlan,
    tilt: TiltSpec | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack per-trial draws into a (n_trials, n_coefficients) matrix.

    Row i is exactly the draw for trial_ids[i]; the batching is purely a
    performance device, so ladder results do not depend on how trials are
    grouped.  Returns (values, log_weights).
    """
    ids = list(trial_ids)
    values = np.empty((len(ids), plan.n_coefficients), dtype=np.float64)
    log_weights = np.zeros(len(ids), dtype=np.float64)
    for i, trial in enumerate(ids):
        spec = RngStreamSpec(master_seed, trial, StreamRole.COEFFICIENTS)
        if tilt is None:
            draw = draw_coefficients(spec, plan)
        else:
            draw = tilted_draw(spec, plan, tilt)
        values[i] = draw.values
        log_weights[i] = draw.log_weight
    return values, log_weights


# -- columnar text serialization ---------------------------------------------

_HEADER_KEYS = (
    "m",
    "degree",
    "radius",
    "epsilon",
    "tail_bound",
    "envelope_confidence",
    "master_seed",
    "trial_id",
    "role",
    "log_weight",
)


def save_draw(draw: CoefficientDraw, path_or_file) -> None:
    """Write a draw as header lines plus one coefficient per line."""
    spec = draw.stream
    header = {
        "m": draw.plan.m,
        "degree": draw.plan.degree,
        "radius": repr(draw.plan.radius),
        "epsilon": repr(draw.plan.epsilon),
        "tail_bound": repr(draw.plan.tail_bound),
        "envelope_confidence": repr(draw.plan.envelope_confidence),
        "master_seed": spec.master_seed if spec else "",
        "trial_id": spec.trial_id if spec else "",
        "role": spec.role.value if spec else "",
        "log_weight": repr(float(draw.log_weight)),
    }
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w") if own else path_or_file
    try:
        for key in _HEADER_KEYS:
            fh.write(f"# {key} = {header[key]}\n")
        for v in draw.values:
            fh.write(f"{float(v)!r}\n")
    finally:
        if own:
            fh.close()


def load_draw(path_or_file) -> CoefficientDraw:
    """Read back a draw written by save_draw; exact round trip."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "r") if own else path_or_file
    try:
        header: dict[str, str] = {}
        values: list[float] = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                header[key.strip()] = val.strip()
            else:
                values.append(float(line))
    finally:
        if own:
            fh.close()
    plan = TruncationPlan(
        m=int(header["m"]),
        radius=float(header["radius"]),
        degree=int(header["degree"]),
        tail_bound=float(header["tail_bound"]),
        envelope_confidence=float(header["envelope_confidence"]),
        epsilon=float(header["epsilon"]),
    )
    spec = None
    if header.get("master_seed"):
        spec = RngStreamSpec(
            master_seed=int(header["master_seed"]),
            trial_id=int(header["trial_id"]),
            role=StreamRole(header["role"]),
        )
    return CoefficientDraw(
        plan=plan,
        values=np.array(values, dtype=np.float64),
        log_weight=float(header["log_weight"]),
        stream=spec,
    )


def draw_to_text(draw: CoefficientDraw) -> str:
    buf = io.StringIO()
    save_draw(draw, buf)
    return buf.getvalue()


def draw_from_text(text: str) -> CoefficientDraw:
    return load_draw(io.StringIO(text))
