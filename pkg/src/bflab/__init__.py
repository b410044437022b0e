"""bflab: a Monte Carlo and exact-bound laboratory for real Gaussian power series.

The model under study is the random entire function

    psi(x) = sum_j alpha_j x^j / sqrt(j!),    alpha_j iid standard real Gaussian,

over multi-indices j in N^m.  The package estimates hole probabilities
(no zeros in a box or ball) and zero-crowding probabilities by plain and
importance-sampled Monte Carlo, evaluates the matching analytic bounds
exactly, and audits the individual inequalities those bounds are built
from.
"""

__version__ = "0.1.0"

from .census import (
    BoxSpec,
    CensusResult,
    count_real_zeros_batch,
    jensen_audit,
    real_hole_indicator,
    real_zero_count,
    winding_count,
    winding_count_batch,
)
from .comparison import (
    LatticeSpec,
    build_lattice,
    chain_relaxation_bound,
    covariance_matrix,
    li_shao_bounds,
    orthant_probability_oracle,
)
from .experiments import (
    ExperimentConfig,
    fit_decay_exponent,
    parse_report,
    run_experiment,
)
from .field import circle_values, evaluate, max_log_modulus, sphere_average_log
from .multiindex import (
    BoundAudit,
    MultiIndex,
    enumerate_up_to_degree,
    enveloped_tail_bound,
    gaussian_tail_audit,
    log_factorial,
    power_ratio_bound_audit,
)
from .rare_events import (
    EventSpec,
    ForcingEventSpec,
    estimate_event_probability,
    forcing_event_log_probability,
    sum_chain_audit,
    verify_forcing_implies_hole,
)
from .sampling import (
    CoefficientDraw,
    RngStreamSpec,
    StreamRole,
    TiltSpec,
    TruncationPlan,
    draw_coefficients,
    load_draw,
    save_draw,
    tilted_draw,
    truncation_plan,
)

__all__ = [
    "BoundAudit",
    "BoxSpec",
    "CensusResult",
    "CoefficientDraw",
    "EventSpec",
    "ExperimentConfig",
    "ForcingEventSpec",
    "LatticeSpec",
    "MultiIndex",
    "RngStreamSpec",
    "StreamRole",
    "TiltSpec",
    "TruncationPlan",
    "build_lattice",
    "chain_relaxation_bound",
    "circle_values",
    "count_real_zeros_batch",
    "covariance_matrix",
    "draw_coefficients",
    "enumerate_up_to_degree",
    "enveloped_tail_bound",
    "estimate_event_probability",
    "evaluate",
    "fit_decay_exponent",
    "forcing_event_log_probability",
    "gaussian_tail_audit",
    "jensen_audit",
    "li_shao_bounds",
    "load_draw",
    "log_factorial",
    "max_log_modulus",
    "orthant_probability_oracle",
    "parse_report",
    "power_ratio_bound_audit",
    "real_hole_indicator",
    "real_zero_count",
    "run_experiment",
    "save_draw",
    "sphere_average_log",
    "sum_chain_audit",
    "tilted_draw",
    "truncation_plan",
    "verify_forcing_implies_hole",
    "winding_count",
    "winding_count_batch",
    "__version__",
]
