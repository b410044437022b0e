"""Experiment ladders, exponent regression, and report emission.

An ExperimentConfig fully determines a run: the ladder it walks, the
seeds, the samplers, and the output paths.  Rows always carry the same
fourteen columns so downstream plotting and regression never renegotiate
the format, and a rerun of the same config reproduces the report files
byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy import special

from . import __version__
from .comparison import (
    build_lattice,
    chain_relaxation_bound,
    covariance_matrix,
    li_shao_bounds,
    orthant_probability_oracle,
)
from .field import max_log_modulus, sphere_average_log
from .intervals import clopper_pearson_upper
from .multiindex import gaussian_tail_audit
from .rare_events import (
    EventSpec,
    ForcingEventSpec,
    estimate_event_probability,
    verify_forcing_implies_hole,
)
from .sampling import (
    RngStreamSpec,
    StreamRole,
    TiltSpec,
    draw_coefficients,
    truncation_plan,
)

_EXPERIMENTS = (
    "hole_ladder",
    "crowding_ladder",
    "growth_stats",
    "bounds_table",
    "audits",
    "omega_verify",
)

# the fixed report schema; order is part of the contract
REPORT_COLUMNS = (
    "experiment",
    "kind",
    "m",
    "r",
    "spacing_or_delta",
    "trials",
    "p_hat",
    "ci_low",
    "ci_high",
    "sampler",
    "seed_master",
    "seed_trial_base",
    "plan_degree",
    "uncertain_fraction",
)

_INT_COLUMNS = {"m", "trials", "seed_master", "seed_trial_base", "plan_degree"}
_STR_COLUMNS = {"experiment", "kind", "sampler"}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment run, fully specified.

    kind selects the event family for the ladders (real_hole or
    complex_hole for hole_ladder; overcrowd or undercrowd for
    crowding_ladder) and defaults per experiment.  The tilt_* fields
    only matter when sampler is "tilted".  variant, threshold, band_bound
    configure the omega_verify experiment.  figures controls whether the
    report path also renders companion PNG plots.
    """

    experiment: str
    m: int = 1
    r_values: tuple = (1.0,)
    trials: int = 1000
    master_seed: int = 0
    trial_base: int = 0
    sampler: str = "plain"
    kind: str | None = None
    tilt_shift_alpha0: float = 0.0
    tilt_band_scale: float = 1.0
    tilt_band_cutoff: int | None = None
    grid_step: float = 0.05
    delta: float = 0.25
    center: float | None = None
    variant: str = "real"
    threshold: float | None = None
    band_bound: float | None = None
    spacing: float = 2.0
    out: str | None = None
    format: str = "csv"
    figures: bool = True

    def __post_init__(self) -> None:
        if self.experiment not in _EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        rs = tuple(float(r) for r in self.r_values)
        if any(b <= a for a, b in zip(rs, rs[1:])):
            raise ValueError("r_values must be strictly increasing")
        if not rs:
            raise ValueError("r_values must be nonempty")
        object.__setattr__(self, "r_values", rs)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.sampler not in ("plain", "tilted"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.format not in ("csv", "json"):
            raise ValueError(f"unknown format {self.format!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Strict construction: unknown keys are an error, listed by name."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        if "r_values" in data:
            data = dict(data)
            data["r_values"] = tuple(data["r_values"])
        return cls(**data)

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def event_kind(self) -> str:
        if self.kind is not None:
            return self.kind
        return "real_hole" if self.experiment == "hole_ladder" else "overcrowd"

    def tilt_for(self, r: float) -> TiltSpec | None:
        if self.sampler != "tilted":
            return None
        kind = self.event_kind()
        tilt_kind = kind if kind in ("real_hole", "complex_hole") else "complex_hole"
        return TiltSpec(
            kind=tilt_kind,
            m=self.m,
            radius=r,
            shift_alpha0=self.tilt_shift_alpha0,
            band_scale=self.tilt_band_scale,
            band_cutoff=self.tilt_band_cutoff,
        )


def _row(config: ExperimentConfig, **overrides) -> dict:
    row = {
        "experiment": config.experiment,
        "kind": "",
        "m": config.m,
        "r": 0.0,
        "spacing_or_delta": 0.0,
        "trials": 0,
        "p_hat": 0.0,
        "ci_low": 0.0,
        "ci_high": 0.0,
        "sampler": config.sampler,
        "seed_master": config.master_seed,
        "seed_trial_base": config.trial_base,
        "plan_degree": 0,
        "uncertain_fraction": 0.0,
    }
    row.update(overrides)
    return row


def _ladder_rows(config: ExperimentConfig) -> list[dict]:
    kind = config.event_kind()
    rows = []
    for r in config.r_values:
        event = EventSpec(
            kind=kind,
            m=config.m,
            r=r,
            delta=config.delta if kind in ("overcrowd", "undercrowd") else 0.0,
            center=config.center,
            grid_step=config.grid_step,
        )
        est = estimate_event_probability(
            event,
            trials=config.trials,
            master_seed=config.master_seed,
            sampler=config.sampler,
            tilt=config.tilt_for(r),
            trial_base=config.trial_base,
        )
        rows.append(
            _row(
                config,
                kind=kind,
                r=r,
                spacing_or_delta=(
                    config.delta if kind in ("overcrowd", "undercrowd") else config.grid_step
                ),
                trials=est.trials,
                p_hat=est.p_hat,
                ci_low=est.ci_low,
                ci_high=est.ci_high,
                sampler=est.sampler,
                plan_degree=est.plan_degree,
                uncertain_fraction=est.uncertain_fraction,
            )
        )
    return rows


def _growth_rows(config: ExperimentConfig) -> list[dict]:
    rows = []
    for r in config.r_values:
        plan = truncation_plan(config.m, r)
        maxima = np.empty(config.trials)
        circles = np.empty(config.trials)
        for i in range(config.trials):
            spec = RngStreamSpec(config.master_seed, config.trial_base + i, StreamRole.COEFFICIENTS)
            draw = draw_coefficients(spec, plan)
            maxima[i] = max_log_modulus(draw, r).value
            circles[i] = sphere_average_log(draw, r).value
        scale = r * r
        for name, vals in (("growth_max", maxima), ("growth_circle", circles)):
            mean = float(vals.mean()) / scale
            se = float(vals.std(ddof=1)) / (scale * math.sqrt(config.trials))
            rows.append(
                _row(
                    config,
                    kind=name,
                    r=r,
                    trials=config.trials,
                    p_hat=mean,
                    ci_low=mean - 1.96 * se,
                    ci_high=mean + 1.96 * se,
                    plan_degree=plan.degree,
                )
            )
    return rows


def _bounds_rows(config: ExperimentConfig) -> list[dict]:
    rows = []
    for r in config.r_values:
        lat = build_lattice(config.m, r, config.spacing)
        lower, upper = li_shao_bounds(lat)
        common = dict(r=r, spacing_or_delta=config.spacing, plan_degree=lat.n_points)
        rows.append(
            _row(config, kind="orthant_lower", p_hat=math.exp(lower), ci_low=math.exp(lower), ci_high=math.exp(lower), **common)
        )
        rows.append(
            _row(config, kind="orthant_upper", p_hat=math.exp(upper), ci_low=math.exp(upper), ci_high=math.exp(upper), **common)
        )
        if lat.n_points <= 25:
            cov = lat.covariance if lat.covariance is not None else covariance_matrix(lat.points)
            est = orthant_probability_oracle(
                cov, trials=config.trials, seed=config.master_seed, confidence=0.99
            )
            rows.append(
                _row(
                    config,
                    kind="orthant_oracle",
                    p_hat=est.p,
                    ci_low=est.ci_low,
                    ci_high=est.ci_high,
                    trials=est.trials,
                    **common,
                )
            )
        cb = chain_relaxation_bound(r, config.m)
        chain_p = math.exp(cb.bound)
        rows.append(
            _row(
                config,
                kind="chain_bound",
                p_hat=chain_p,
                ci_low=chain_p,
                ci_high=chain_p,
                uncertain_fraction=0.0 if cb.constant_dominates else 1.0,
                **common,
            )
        )
    return rows


def _audit_rows(config: ExperimentConfig) -> list[dict]:
    """One row per tail/ball audit point.

    p_hat holds the exact probability, ci_low == ci_high the claimed
    bound, and uncertain_fraction flags a violation (1.0 when the claim
    does not hold).
    """
    lams = [1.0] + [round(1.4 + 0.1 * i, 10) for i in range(87)]
    rows = []
    for lam in lams:
        tail, ball = gaussian_tail_audit(lam)
        for audit in (tail, ball):
            rows.append(
                _row(
                    config,
                    kind=f"{audit.label}_audit",
                    r=lam,
                    p_hat=audit.reference_value,
                    ci_low=audit.claimed_bound,
                    ci_high=audit.claimed_bound,
                    uncertain_fraction=0.0 if audit.verdict else 1.0,
                )
            )
    return rows


def _omega_rows(config: ExperimentConfig) -> list[dict]:
    rows = []
    for r in config.r_values:
        spec = ForcingEventSpec(
            variant=config.variant,
            m=config.m,
            r=r,
            threshold=config.threshold,
            band_bound=config.band_bound,
        )
        report = verify_forcing_implies_hole(spec, config.trials, config.master_seed)
        plan_degree = 0 if r == 0.0 else truncation_plan(config.m, r).degree
        viol = report.violations / report.samples
        rows.append(
            _row(
                config,
                kind=f"forcing_{config.variant}",
                r=r,
                trials=report.samples,
                p_hat=viol,
                ci_low=viol,
                ci_high=viol,
                plan_degree=plan_degree,
                uncertain_fraction=report.uncertain / report.samples,
            )
        )
    return rows


def experiment_rows(config: ExperimentConfig) -> list[dict]:
    """Run the configured experiment and return its report rows."""
    if config.experiment in ("hole_ladder", "crowding_ladder"):
        return _ladder_rows(config)
    if config.experiment == "growth_stats":
        return _growth_rows(config)
    if config.experiment == "bounds_table":
        return _bounds_rows(config)
    if config.experiment == "audits":
        return _audit_rows(config)
    return _omega_rows(config)


# -- exponent regression ------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    """Weighted log-log regression of -log p against r."""

    radii: tuple
    log_neg_log_p: tuple
    slope: float
    intercept: float
    r2_fit: float
    slope_ci: tuple
    excluded: tuple = ()


def fit_decay_exponent(
    estimates,
    confidence: float = 0.95,
    rel_width_cap: float = 2.0,
    min_points: int = 3,
) -> ExponentFit:
    """Fit log(-log p_hat) = slope * log r + intercept by weighted LS.

    estimates is a sequence of (r, p_hat, ci_low, ci_high).  Points with
    p_hat outside (0, 1), or with CI width above rel_width_cap * p_hat,
    are excluded and listed with reasons; zero-hit points additionally
    report the one-sided Clopper-Pearson bound that still constrains
    them.  Weights follow from propagating the CI half-width through
    p -> log(-log p).  Fewer than min_points usable points is an error.
    """
    z = float(special.ndtri(0.5 + 0.5 * confidence))
    xs, ys, sigmas, excluded = [], [], [], []
    for r, p_hat, ci_low, ci_high in estimates:
        if not (0.0 < p_hat < 1.0):
            if p_hat == 0.0:
                # the number of trials is unknown here; report the width cap
                excluded.append((float(r), "zero_hits"))
            else:
                excluded.append((float(r), "p_out_of_range"))
            continue
        width = ci_high - ci_low
        if width > rel_width_cap * p_hat:
            excluded.append((float(r), "interval_too_wide"))
            continue
        sigma_p = max(width / (2.0 * z), 1e-300)
        y = math.log(-math.log(p_hat))
        sigma_y = sigma_p / (p_hat * abs(math.log(p_hat)))
        xs.append(math.log(r))
        ys.append(y)
        sigmas.append(max(sigma_y, 1e-9))
    if len(xs) < min_points:
        raise ValueError(
            f"only {len(xs)} usable points (need {min_points}); excluded: {excluded}"
        )
    x = np.asarray(xs)
    y = np.asarray(ys)
    w = 1.0 / np.asarray(sigmas) ** 2
    sw = w.sum()
    xbar = (w * x).sum() / sw
    ybar = (w * y).sum() / sw
    sxx = (w * (x - xbar) ** 2).sum()
    slope = float((w * (x - xbar) * (y - ybar)).sum() / sxx)
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (y - ybar) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    slope_sd = math.sqrt(1.0 / sxx)
    ci = (slope - z * slope_sd, slope + z * slope_sd)
    return ExponentFit(
        radii=tuple(float(math.exp(v)) for v in x),
        log_neg_log_p=tuple(float(v) for v in y),
        slope=slope,
        intercept=intercept,
        r2_fit=float(r2),
        slope_ci=ci,
        excluded=tuple(excluded),
    )


def fit_from_rows(rows, **kwargs) -> ExponentFit:
    """fit_decay_exponent over report rows (one estimate per row)."""
    est = [(row["r"], row["p_hat"], row["ci_low"], row["ci_high"]) for row in rows]
    return fit_decay_exponent(est, **kwargs)


def zero_hit_upper_bounds(rows, confidence: float = 0.95) -> list[tuple]:
    """(r, upper bound) for rows with no observed events."""
    out = []
    for row in rows:
        if row["p_hat"] == 0.0 and row["trials"] > 0:
            out.append((row["r"], clopper_pearson_upper(0, row["trials"], confidence)))
    return out


# -- report emission ----------------------------------------------------------


def _format_value(key: str, value) -> str:
    if key in _STR_COLUMNS:
        return str(value)
    if key in _INT_COLUMNS:
        return str(int(value))
    return format(float(value), ".17g")


def report_text(rows, fmt: str = "csv") -> str:
    """Render rows in the fixed schema as CSV or JSON text."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([_format_value(k, row[k]) for k in REPORT_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        payload = [
            {
                k: (row[k] if k in _STR_COLUMNS else (int(row[k]) if k in _INT_COLUMNS else float(row[k])))
                for k in REPORT_COLUMNS
            }
            for row in rows
        ]
        return json.dumps(payload, indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


def parse_report(path) -> list[dict]:
    """Read a report file back into typed rows (CSV or JSON by suffix)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        raw = json.loads(text)
    else:
        reader = csv.DictReader(io.StringIO(text))
        raw = list(reader)
    rows = []
    for entry in raw:
        row = {}
        for k in REPORT_COLUMNS:
            v = entry[k]
            if k in _STR_COLUMNS:
                row[k] = str(v)
            elif k in _INT_COLUMNS:
                row[k] = int(v)
            else:
                row[k] = float(v)
        rows.append(row)
    return rows


def emit_report(rows, out_base, fmt: str = "csv", config: ExperimentConfig | None = None):
    """Write the report file plus a metadata sidecar; returns the paths.

    The report itself is a pure function of the rows; everything volatile
    (wall-clock) lives in the sidecar, so identical runs produce
    identical report bytes.
    """
    out_base = Path(out_base)
    if out_base.parent != Path("."):
        out_base.parent.mkdir(parents=True, exist_ok=True)
    suffix = ".csv" if fmt == "csv" else ".json"
    report_path = out_base.with_suffix(suffix)
    try:
        report_path.write_text(report_text(rows, fmt))
    except OSError as exc:
        raise OSError(f"cannot write report to {report_path}: {exc}") from exc
    meta = {
        "version": __version__,
        "config_hash": config.config_hash() if config is not None else None,
        "config": asdict(config) if config is not None else None,
        "rows": len(rows),
        "wall_clock_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    meta_path = out_base.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, default=str) + "\n")
    return report_path, meta_path


def run_experiment(config: ExperimentConfig):
    """Execute the config end to end; returns (rows, written paths)."""
    rows = experiment_rows(config)
    paths = []
    if config.out is not None:
        report_path, meta_path = emit_report(rows, config.out, config.format, config)
        paths = [report_path, meta_path]
        if config.figures:
            from .figures import render_report_figures

            paths.extend(render_report_figures(rows, Path(config.out)))
    return rows, paths
