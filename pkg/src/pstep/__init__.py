"""Vehicle-routing toolkit built on step-budgeted partial-path
formulations: one parameter p sweeps between the compact arc-flow model
(p=1) and the route-partition model (p=n+1), with column generation and
exhaustive oracles for desk-scale verification."""

from .colgen import ColGenConfig, ColGenResult, solve_relaxation
from .formulation import (
    DualSolution,
    PStepColumn,
    build_rmp,
    build_vf_model,
    column_from_path,
    extract_duals,
    reduced_cost,
)
from .instance import (
    Instance,
    SyntheticSpec,
    generate_prop4,
    generate_prop5,
    generate_random,
    load_instance,
    parse_instance,
)
from .pricing import PricingConfig, price

__all__ = [
    "ColGenConfig",
    "ColGenResult",
    "DualSolution",
    "Instance",
    "PStepColumn",
    "PricingConfig",
    "SyntheticSpec",
    "build_rmp",
    "build_vf_model",
    "column_from_path",
    "extract_duals",
    "generate_prop4",
    "generate_prop5",
    "generate_random",
    "load_instance",
    "parse_instance",
    "price",
    "reduced_cost",
    "solve_relaxation",
]

__version__ = "0.1.0"
