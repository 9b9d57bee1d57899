"""Time-optimal synthesis and optimality certificates for five square-norm
structures on the Heisenberg, Grushin, and Martinet distributions."""

from .models import (
    Arc,
    Control,
    ControlSchedule,
    Model,
    ModelId,
    all_models,
    bang_arc,
    bang_flow,
    get_model,
    schedule_dumps,
    schedule_endpoint,
    schedule_loads,
    singular_arc,
)
from .pmp import (
    ExtremalLift,
    SingularPolicy,
    SwitchingRecord,
    check_pmp_invariants,
    classify,
    make_lift,
    synthesize_extremal,
    transport,
)
from .second_order import (
    QFormReport,
    assemble_report,
    check_unique_lift,
    compute_Z_fields,
    fit_extremal_data,
)
from .vecfield import Poly, PolyVectorField, ad_exp, bracket, evaluate, rk_integrate

__version__ = "0.1.0"

__all__ = [
    "Arc",
    "Control",
    "ControlSchedule",
    "ExtremalLift",
    "Model",
    "ModelId",
    "Poly",
    "PolyVectorField",
    "QFormReport",
    "SingularPolicy",
    "SwitchingRecord",
    "ad_exp",
    "all_models",
    "assemble_report",
    "bang_arc",
    "bang_flow",
    "bracket",
    "check_pmp_invariants",
    "check_unique_lift",
    "classify",
    "compute_Z_fields",
    "evaluate",
    "fit_extremal_data",
    "get_model",
    "make_lift",
    "rk_integrate",
    "schedule_dumps",
    "schedule_endpoint",
    "schedule_loads",
    "singular_arc",
    "synthesize_extremal",
    "transport",
]
