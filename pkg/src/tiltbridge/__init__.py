"""tiltbridge: tilt potentials and typical tables for margin-conditioned matrices.

Solves the maximum-likelihood tilting problem for random matrices with
prescribed row and column sums over pluggable exponential-family base
measures, classifies margin tameness, and verifies the model's probabilistic
predictions (entry-law mixtures, cut-norm concentration, singular-value
spectra) at desk scale.
"""

__version__ = "0.1.0"

from .margins import (
    Margin,
    StepMargin,
    barvinok,
    clone,
    l1_margin_distance,
    load_margin,
    save_margin,
    step_l1_distance,
    to_step_margin,
    validate,
)
from .measures import (
    BaseMeasure,
    TamenessBand,
    TiltBridgeError,
    make_measure,
    mean_inverse,
    parse_measure_spec,
    phi_numeric,
    relative_entropy,
    sample_tilted,
    tameness_band,
)
from .sinkhorn import (
    Potentials,
    SinkhornReport,
    SolverConfig,
    TypicalTable,
    dual_objective,
    entropy_of_table,
    linf_monotonicity_check,
    rate_diagnostics,
    solve,
)
from .tameness import (
    PhaseVerdict,
    blowup_sweep,
    classify_bounded,
    classify_logconvex,
    critical_ratio,
    erdos_gallai_deep,
)

__all__ = [
    "BaseMeasure",
    "Margin",
    "PhaseVerdict",
    "Potentials",
    "SinkhornReport",
    "SolverConfig",
    "StepMargin",
    "TamenessBand",
    "TiltBridgeError",
    "TypicalTable",
    "barvinok",
    "blowup_sweep",
    "classify_bounded",
    "classify_logconvex",
    "clone",
    "critical_ratio",
    "dual_objective",
    "entropy_of_table",
    "erdos_gallai_deep",
    "l1_margin_distance",
    "linf_monotonicity_check",
    "load_margin",
    "make_measure",
    "mean_inverse",
    "parse_measure_spec",
    "phi_numeric",
    "rate_diagnostics",
    "relative_entropy",
    "sample_tilted",
    "save_margin",
    "solve",
    "step_l1_distance",
    "tameness_band",
    "to_step_margin",
    "validate",
]
