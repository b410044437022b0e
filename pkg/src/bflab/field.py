"""Series evaluation, invariance transforms, and growth statistics.

The random series psi(x) = sum_j alpha_j x^j / sqrt(j!) has reproducing
kernel E[psi(x) psi(y)] = exp(x . y); the damped field
exp(-|x|^2/2) psi(x) is unit-variance and stationary in law.  This module
evaluates truncated draws (in log space once plain accumulation could
overflow), implements the translation and rotation invariances as exact
maps on coefficient sequences, and measures growth along circles and
spheres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import special

from .multiindex import exponent_table, log_factorial_rows
from .sampling import CoefficientDraw, RngStreamSpec, StreamRole, derive_stream

# plain accumulation is allowed while the largest term stays below this
_PLAIN_LOG_LIMIT = 690.0
_UNDERFLOW_FLOOR = 1e-300


@dataclass(frozen=True)
class Evaluation:
    """A series value with its log-magnitude and certification status.

    certified means the point lies inside the truncation plan's radius, so
    the plan's tail_bound applies to the discarded part.  When the value
    exceeds double range, value is +-inf (or a complex infinity) but
    log_abs is still finite and accurate, and overflowed is set.
    """

    value: complex | float
    log_abs: float
    certified: bool
    overflowed: bool = False


@dataclass(frozen=True)
class GrowthStatistic:
    """One growth measurement of a draw at a given radius."""

    kind: str
    radius: float
    value: float
    resolution: str
    std_error: float | None = None
    excluded_nodes: int = 0


# -- basis helpers ------------------------------------------------------------


def real_basis_matrix(degree: int, xs: np.ndarray) -> np.ndarray:
    """Matrix B[j, i] = xs[i]^j / sqrt(j!), built by a stable recurrence."""
    xs = np.asarray(xs, dtype=np.float64)
    out = np.empty((degree + 1, xs.size), dtype=np.float64)
    out[0] = 1.0
    for j in range(1, degree + 1):
        out[j] = out[j - 1] * xs / math.sqrt(j)
    return out


def complex_basis_matrix(degree: int, zs: np.ndarray) -> np.ndarray:
    """Matrix B[j, i] = zs[i]^j / sqrt(j!) for complex nodes."""
    zs = np.asarray(zs, dtype=np.complex128)
    out = np.empty((degree + 1, zs.size), dtype=np.complex128)
    out[0] = 1.0
    for j in range(1, degree + 1):
        out[j] = out[j - 1] * zs / math.sqrt(j)
    return out


def radial_scale(degree: int, r: float) -> np.ndarray:
    """Vector r^j / sqrt(j!), j = 0..degree."""
    out = np.empty(degree + 1, dtype=np.float64)
    out[0] = 1.0
    for j in range(1, degree + 1):
        out[j] = out[j - 1] * r / math.sqrt(j)
    return out


def circle_values(coeff_rows: np.ndarray, degree: int, r: float, n_nodes: int) -> np.ndarray:
    """psi on the uniform circle net r e^{2 pi i k/n}, one row per draw.

    Uses the inverse FFT: psi(r e^{i theta_k}) = sum_j (alpha_j r^j/sqrt(j!))
    e^{i j theta_k}.  n_nodes must exceed the polynomial degree so no
    frequency aliases.
    """
    if n_nodes <= degree:
        raise ValueError(f"need n_nodes > degree, got {n_nodes} <= {degree}")
    coeff_rows = np.atleast_2d(coeff_rows)
    scaled = coeff_rows * radial_scale(degree, r)[None, :]
    return np.fft.ifft(scaled, n=n_nodes, axis=1) * n_nodes


def _damped_circle_log_abs(values: np.ndarray, degree: int, r: float, n: int) -> np.ndarray:
    """log|psi| on the uniform circle net, overflow-safe via r^2/2 damping.

    Nodes whose damped magnitude underflows come back as -inf.
    """
    half_r2 = 0.5 * r * r
    damp = math.exp(-half_r2) if half_r2 < 700.0 else 0.0
    if damp > 0.0:
        mags = np.abs(circle_values(values * damp, degree, r, n)[0])
    else:
        # stage the damping inside the radial scale itself
        j = np.arange(degree + 1, dtype=np.float64)
        log_scale = j * math.log(r) - 0.5 * special.gammaln(j + 1) - half_r2
        mags = np.abs(np.fft.ifft(values * np.exp(log_scale), n=n) * n)
    with np.errstate(divide="ignore"):
        return np.where(mags > _UNDERFLOW_FLOOR, np.log(np.maximum(mags, _UNDERFLOW_FLOOR)), -np.inf) + half_r2


def derivative_envelope(abs_coeffs: np.ndarray, degree: int, x: float) -> float:
    """Bound sum_j |alpha_j| j x^{j-1} / sqrt(j!) on |psi'| at |point| = x, m=1."""
    if degree < 1:
        return 0.0
    j = np.arange(1, degree + 1, dtype=np.float64)
    weights = np.sqrt(j) * radial_scale(degree - 1, x)
    return float(np.dot(np.atleast_1d(abs_coeffs)[1:], weights))


@lru_cache(maxsize=16)
def _inv_sqrt_factorials(m: int, degree: int) -> np.ndarray:
    logs = log_factorial_rows(exponent_table(m, degree))
    out = np.exp(-0.5 * logs)
    out.setflags(write=False)
    return out


# -- point evaluation ---------------------------------------------------------


def _coerce_point(point, m: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(point))
    if arr.shape != (m,):
        raise ValueError(f"point has shape {arr.shape}, expected ({m},) for m={m}")
    return arr


def evaluate(draw: CoefficientDraw, point) -> Evaluation:
    """Evaluate the truncated series at one point of R^m or C^m.

    Real input returns a real value.  Accumulation moves to log space when
    the largest term could overflow, so log_abs stays accurate at radii
    far beyond double range.
    """
    p = _coerce_point(point, draw.m)
    norm = float(np.linalg.norm(p))
    certified = norm <= draw.plan.radius * (1.0 + 1e-12)
    real_case = not np.iscomplexobj(p)
    values = draw.values
    max_abs_coeff = float(np.max(np.abs(values))) if values.size else 0.0

    # the largest basis magnitude over the index set is at most e^{|p|^2/2}
    plain_safe = (
        max_abs_coeff == 0.0
        or 0.5 * norm * norm + math.log(max_abs_coeff) < _PLAIN_LOG_LIMIT
    )
    if not plain_safe:
        return _evaluate_log_space(draw, p, certified, real_case)

    if draw.m == 1:
        z = p[0]
        basis = (
            real_basis_matrix(draw.degree, np.array([z]))[:, 0]
            if real_case
            else complex_basis_matrix(draw.degree, np.array([z]))[:, 0]
        )
        val = np.dot(values, basis)
    else:
        exps = exponent_table(draw.m, draw.degree)
        powers = np.prod(np.asarray(p)[None, :] ** exps, axis=1)
        val = np.dot(values * _inv_sqrt_factorials(draw.m, draw.degree), powers)
    mag = abs(val)
    log_abs = math.log(mag) if mag > 0 else -math.inf
    return Evaluation(
        value=float(np.real(val)) if real_case else complex(val),
        log_abs=log_abs,
        certified=certified,
    )


def _evaluate_log_space(
    draw: CoefficientDraw, p: np.ndarray, certified: bool, real_case: bool
) -> Evaluation:
    exps = exponent_table(draw.m, draw.degree)
    fexps = exps.astype(np.float64)
    values = draw.values
    mags = np.abs(p).astype(np.float64)
    zero_coord = mags == 0.0
    log_p = np.where(zero_coord, 0.0, np.log(np.where(zero_coord, 1.0, mags)))
    log_terms = fexps @ log_p - 0.5 * log_factorial_rows(exps)
    with np.errstate(divide="ignore"):
        log_terms = log_terms + np.where(values != 0.0, np.log(np.abs(values)), -np.inf)
    if zero_coord.any():
        # a positive power of a vanishing coordinate kills the whole term
        dead = np.any((exps > 0) & zero_coord[None, :], axis=1)
        log_terms[dead] = -np.inf

    if real_case:
        neg = np.asarray(p) < 0.0
        parity = exps[:, neg].sum(axis=1) % 2 if neg.any() else np.zeros(len(exps), dtype=np.int64)
        phases = np.sign(values) * np.where(parity == 1, -1.0, 1.0)
    else:
        args = np.angle(np.asarray(p, dtype=np.complex128))
        phases = np.sign(values) * np.exp(1j * (fexps @ args))

    top = float(np.max(log_terms))
    if top == -math.inf:
        return Evaluation(
            value=0.0 if real_case else 0.0 + 0.0j, log_abs=-math.inf, certified=certified
        )
    total = np.sum(phases * np.exp(log_terms - top))
    mag = abs(total)
    log_abs = top + (math.log(mag) if mag > 0 else -math.inf)
    if log_abs < _PLAIN_LOG_LIMIT:
        val = total * math.exp(top)
        value = float(np.real(val)) if real_case else complex(val)
        return Evaluation(value=value, log_abs=log_abs, certified=certified)
    # beyond double range: keep only the direction, flag the overflow
    direction = total / mag
    if real_case:
        value = math.inf if float(np.real(direction)) > 0 else -math.inf
    else:
        value = complex(direction * math.inf)
    return Evaluation(value=value, log_abs=log_abs, certified=certified, overflowed=True)


def evaluate_weighted(draw: CoefficientDraw, point) -> float:
    """Damped field value exp(-|x|^2/2) psi(x) at a real point.

    The damped field has unit variance everywhere and correlation
    exp(-|s-t|^2/2), which keeps values order one at any radius.
    """
    p = _coerce_point(point, draw.m)
    if np.iscomplexobj(p):
        raise ValueError("weighted evaluation is defined for real points")
    ev = evaluate(draw, p)
    norm2 = float(np.dot(p, p))
    if ev.overflowed:
        sign = 1.0 if ev.value > 0 else -1.0
        return sign * math.exp(ev.log_abs - 0.5 * norm2)
    return float(ev.value) * math.exp(-0.5 * norm2)


def weighted_values_on_grid(coeff_rows: np.ndarray, degree: int, xs: np.ndarray) -> np.ndarray:
    """Damped field on a real 1-d grid for a batch of draws (rows)."""
    grid = np.asarray(xs, dtype=np.float64)
    basis = real_basis_matrix(degree, grid)
    return (np.atleast_2d(coeff_rows) @ basis) * np.exp(-0.5 * grid * grid)[None, :]


def kernel(x, y) -> complex | float:
    """Reproducing kernel exp(x . y) of the coefficient model."""
    xa = np.atleast_1d(np.asarray(x))
    ya = np.atleast_1d(np.asarray(y))
    if xa.shape != ya.shape:
        raise ValueError(f"kernel arguments have shapes {xa.shape} vs {ya.shape}")
    dot = np.sum(xa * ya)
    if np.iscomplexobj(xa) or np.iscomplexobj(ya):
        return complex(np.exp(dot))
    return float(np.exp(dot))


def weighted_covariance(s, t) -> float:
    """Correlation exp(-|s-t|^2/2) of the damped field at real points."""
    sa = np.atleast_1d(np.asarray(s, dtype=np.float64))
    ta = np.atleast_1d(np.asarray(t, dtype=np.float64))
    d = sa - ta
    return float(np.exp(-0.5 * np.dot(d, d)))


# -- invariance transforms ----------------------------------------------------


@lru_cache(maxsize=8)
def _recenter_matrix_1d(degree: int, y: float) -> np.ndarray:
    """Coefficient map for translation by y at truncation degree N (m = 1).

    beta = M alpha realises psi_alpha(x) = e^{-y^2/2 + y x} psi_beta(x - y)
    up to truncation.  Algebraically M is e^{-y^2/2} times the product of
    the Taylor-shift and exponential-multiplier triangles, but forming
    that product cancels catastrophically at high degree, so the entries
    are taken from the closed form in associated Laguerre polynomials:

        M[j+d, j] = (-s)^d m(j, d) L_j^{(d)}(y^2),
        M[j, j+d] = s^d m(j, d) L_j^{(d)}(y^2),
        m(j, d) = sqrt(j!/(j+d)!) |y|^d e^{-y^2/2},  s = sign(y).

    The untruncated map is orthogonal, which is how translating the zero
    set preserves the coefficient law; rows near the truncation edge lose
    the mass that would sit beyond degree N.
    """
    if y == 0.0:
        out = np.eye(degree + 1)
        out.setflags(write=False)
        return out
    out = np.zeros((degree + 1, degree + 1))
    lg = special.gammaln(np.arange(degree + 1, dtype=np.float64) + 1.0)
    sgn = math.copysign(1.0, y)
    for d in range(degree + 1):
        k = np.arange(0, degree + 1 - d)
        mag = np.exp(0.5 * (lg[k] - lg[k + d]) + d * math.log(abs(y)) - 0.5 * y * y)
        if not mag.any():
            # every later diagonal is smaller still
            break
        lag = special.eval_genlaguerre(k, d, y * y)
        # out-of-band diagonals can underflow mag while lag overflows;
        # those true entries are far below double precision
        ent = np.where(mag > 0.0, mag * np.where(np.isfinite(lag), lag, 0.0), 0.0)
        out[k + d, k] = (-sgn) ** d * ent
        if d:
            out[k, k + d] = sgn**d * ent
    out.setflags(write=False)
    return out


def recenter_coefficients(draw: CoefficientDraw, y) -> CoefficientDraw:
    """Coefficients beta with psi_alpha(x) = e^{-|y|^2/2 + y.x} psi_beta(x - y).

    Valid as an identity up to truncation tolerance; the returned plan's
    certified radius shrinks by |y|.  For m >= 2 the map is the tensor
    product of the per-coordinate one-dimensional maps, applied axis by
    axis on the dense coefficient tensor.
    """
    yv = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if yv.shape != (draw.m,):
        raise ValueError(f"shift has shape {yv.shape}, expected ({draw.m},)")
    norm = float(np.linalg.norm(yv))
    if norm >= draw.plan.radius:
        raise ValueError(
            f"shift norm {norm} is not inside the certified radius {draw.plan.radius}"
        )
    new_plan = replace(draw.plan, radius=draw.plan.radius - norm)
    if draw.m == 1:
        mat = _recenter_matrix_1d(draw.degree, float(yv[0]))
        return CoefficientDraw(plan=new_plan, values=mat @ draw.values, log_weight=draw.log_weight)

    side = draw.degree + 1
    if side**draw.m > 2 * 10**7:
        raise ValueError(
            f"dense coefficient tensor would need {side**draw.m} entries; "
            "recentring at this degree and dimension is not supported"
        )
    exps = exponent_table(draw.m, draw.degree)
    tensor = np.zeros((side,) * draw.m, dtype=np.float64)
    tensor[tuple(exps.T)] = draw.values
    for axis in range(draw.m):
        mat = _recenter_matrix_1d(draw.degree, float(yv[axis]))
        tensor = np.moveaxis(np.tensordot(mat, np.moveaxis(tensor, axis, 0), axes=1), 0, axis)
    return CoefficientDraw(plan=new_plan, values=tensor[tuple(exps.T)], log_weight=draw.log_weight)


def rotate_recenter_coefficients(
    draw: CoefficientDraw, zeta
) -> tuple[CoefficientDraw, np.ndarray]:
    """Recentring data for a complex centre zeta, coordinate-wise.

    Writing y_k = |zeta_k| and theta_k = arg(zeta_k), returns (beta, phases)
    with beta = recenter_coefficients(draw, y) and phases[j] = -j . theta,
    realising

        psi_alpha(x) = e^{-|y|^2/2 + x . y}
                       sum_j beta_j e^{i phases[j]} w^j / sqrt(j!),
        w_k = x_k e^{i theta_k} - zeta_k.

    Rotating each coordinate back to the positive axis reduces a complex
    centre to the real translation handled above.
    """
    zv = np.atleast_1d(np.asarray(zeta, dtype=np.complex128))
    if zv.shape != (draw.m,):
        raise ValueError(f"centre has shape {zv.shape}, expected ({draw.m},)")
    y = np.abs(zv)
    theta = np.angle(zv)
    recent = recenter_coefficients(draw, y)
    exps = exponent_table(draw.m, draw.degree)
    phases = -(exps.astype(np.float64) @ theta)
    return recent, phases


# -- growth statistics --------------------------------------------------------


def max_log_modulus(
    draw: CoefficientDraw, r: float, resolution: int | None = None
) -> GrowthStatistic:
    """max over the closed complex ball of radius r of log|psi|.

    For m = 1 the maximum principle reduces the ball to its boundary
    circle; the node count doubles until a gradient-envelope bound puts
    the net discretisation error below 0.01 r^2.  For m >= 2 the reported
    value is the maximum over the distinguished boundary of the inscribed
    polydisk of polyradius r/sqrt(m), a certified lower bound for the
    ball maximum with the same refinement control.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    budget = 0.01 * r * r
    if draw.m == 1:
        n = resolution or 4 * math.ceil(r * r) + 64
        log_env = _log_derivative_envelope_1d(draw.values, draw.degree, r)
        log_peak = -math.inf
        for _ in range(16):
            n = max(n, draw.degree + 1)
            logs = _damped_circle_log_abs(draw.values, draw.degree, r, n)
            log_peak = float(np.max(logs))
            if log_peak == -math.inf:
                return GrowthStatistic("max_log_modulus", r, -math.inf, f"circle:n={n}")
            ratio_log = math.log(math.pi / n) + log_env - log_peak
            err = math.log1p(math.exp(ratio_log)) if ratio_log < 50 else math.inf
            if err <= budget:
                return GrowthStatistic("max_log_modulus", r, log_peak, f"circle:n={n}")
            n *= 2
        return GrowthStatistic("max_log_modulus", r, log_peak, f"circle:n={n};unconverged")

    rho = r / math.sqrt(draw.m)
    exps = exponent_table(draw.m, draw.degree)
    degrees = exps.sum(axis=1).astype(np.float64)
    with np.errstate(divide="ignore"):
        log_abs_terms = (
            np.where(draw.values != 0.0, np.log(np.abs(draw.values)), -np.inf)
            - 0.5 * log_factorial_rows(exps)
            + degrees * math.log(rho)
        )
    # envelope of the angular gradient on the polydisk, in log space
    pos = degrees > 0
    finite = pos & np.isfinite(log_abs_terms)
    log_env = (
        float(special.logsumexp(log_abs_terms[finite] + np.log(degrees[finite])))
        if finite.any()
        else -math.inf
    )
    n = resolution or 16
    log_peak = -math.inf
    for _ in range(9):
        n = max(n, 8)
        if n**draw.m > 4 * 10**6:
            break
        logs = _polydisk_log_abs(draw, rho, n)
        log_peak = float(np.max(logs))
        if log_peak == -math.inf:
            return GrowthStatistic("max_log_modulus", r, -math.inf, f"polydisk:n={n}^{draw.m}")
        ratio_log = math.log(math.pi / n) + log_env - log_peak
        err = draw.m * (math.log1p(math.exp(ratio_log)) if ratio_log < 50 else math.inf)
        if err <= budget:
            return GrowthStatistic("max_log_modulus", r, log_peak, f"polydisk:n={n}^{draw.m}")
        n *= 2
    return GrowthStatistic("max_log_modulus", r, log_peak, f"polydisk:n={n}^{draw.m};unconverged")


def _log_derivative_envelope_1d(values: np.ndarray, degree: int, r: float) -> float:
    """log of sum_j |alpha_j| j r^{j-1}/sqrt(j!), computed without overflow."""
    if degree < 1:
        return -math.inf
    j = np.arange(1, degree + 1, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logs = (
            np.where(values[1:] != 0.0, np.log(np.abs(values[1:])), -np.inf)
            + np.log(j)
            + (j - 1) * math.log(r)
            - 0.5 * special.gammaln(j + 1)
        )
    finite = logs[np.isfinite(logs)]
    return float(special.logsumexp(finite)) if finite.size else -math.inf


def _polydisk_log_abs(draw: CoefficientDraw, rho: float, n: int) -> np.ndarray:
    """log|psi| on the n^m product torus of per-coordinate radius rho.

    Per-axis basis matrices are damped by e^{-rho^2/2} each, so the tensor
    of values never overflows; the damping is added back to the logs.
    """
    side = draw.degree + 1
    exps = exponent_table(draw.m, draw.degree)
    nodes = rho * np.exp(2j * np.pi * np.arange(n) / n)
    axis_mat = complex_basis_matrix(draw.degree, nodes).T * math.exp(-0.5 * rho * rho)
    tensor = np.zeros((side,) * draw.m, dtype=np.complex128)
    tensor[tuple(exps.T)] = draw.values
    for axis in range(draw.m):
        tensor = np.moveaxis(np.tensordot(axis_mat, np.moveaxis(tensor, axis, 0), axes=1), 0, axis)
    mags = np.abs(tensor)
    with np.errstate(divide="ignore"):
        logs = np.where(mags > _UNDERFLOW_FLOOR, np.log(np.maximum(mags, _UNDERFLOW_FLOOR)), -np.inf)
    return logs + 0.5 * draw.m * rho * rho


def sphere_average_log(
    draw: CoefficientDraw,
    r: float,
    nodes: int | None = None,
    direction_stream: RngStreamSpec | None = None,
) -> GrowthStatistic:
    """Average of log|psi| over the complex sphere |z| = r.

    m = 1 uses the trapezoid rule on the circle, which is spectrally
    accurate away from zeros pinned to the contour; nodes falling under
    the underflow floor are nudged, then excluded (with a count) if three
    nudges fail.  m >= 2 averages over Haar-random complex directions and
    reports a Monte Carlo standard error.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    if draw.m == 1:
        n = nodes or 4 * math.ceil(r * r) + 64
        n = max(n, draw.degree + 1)
        logs = _damped_circle_log_abs(draw.values, draw.degree, r, n)
        excluded = 0
        bad = np.flatnonzero(~np.isfinite(logs))
        if bad.size:
            thetas = 2.0 * np.pi * bad / n
            redo = np.zeros(bad.size)
            for attempt in range(1, 4):
                zs = r * np.exp(1j * (thetas + 1e-9 * attempt))
                redo = np.abs(complex_basis_matrix(draw.degree, zs).T @ draw.values)
                if np.all(redo > _UNDERFLOW_FLOOR):
                    break
            still = redo <= _UNDERFLOW_FLOOR
            excluded = int(still.sum())
            logs[bad] = np.where(still, np.nan, np.log(np.maximum(redo, _UNDERFLOW_FLOOR)))
        value = float(np.nanmean(logs))
        return GrowthStatistic(
            "sphere_average_log", r, value, f"trapezoid:n={n}", excluded_nodes=excluded
        )

    k = nodes or 1000
    spec = direction_stream or RngStreamSpec(0, 0, StreamRole.QUADRATURE)
    gen = derive_stream(spec)
    g = gen.standard_normal((k, 2 * draw.m)).view(np.complex128)
    dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    logs = np.empty(k)
    excluded = 0
    floor = math.log(_UNDERFLOW_FLOOR)
    for i in range(k):
        ev = evaluate(draw, r * dirs[i])
        if ev.log_abs < floor:
            excluded += 1
            logs[i] = np.nan
        else:
            logs[i] = ev.log_abs
    value = float(np.nanmean(logs))
    se = float(np.nanstd(logs, ddof=1) / math.sqrt(k - excluded)) if k - excluded > 1 else None
    return GrowthStatistic(
        "sphere_average_log",
        r,
        value,
        f"mc_directions:n={k}",
        std_error=se,
        excluded_nodes=excluded,
    )
