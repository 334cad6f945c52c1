"""hBOA with a distance-based structural bias mined from earlier runs."""

from ._core import (
    BiasTable,
    CapabilityError,
    ConfigError,
    InputError,
    Instance,
    ParseError,
    Problem,
    StructureError,
    UnsolvableError,
    bde_leaf_logscore,
    bisection,
    build_model,
    crossvalidate,
    generate_nk,
    generate_spin_glass,
    load_bias_table,
    load_instance,
    mine,
    run,
    sample,
    solve_exact,
)

__all__ = [
    "BiasTable",
    "CapabilityError",
    "ConfigError",
    "InputError",
    "Instance",
    "ParseError",
    "Problem",
    "StructureError",
    "UnsolvableError",
    "bde_leaf_logscore",
    "bisection",
    "build_model",
    "crossvalidate",
    "generate_nk",
    "generate_spin_glass",
    "load_bias_table",
    "load_instance",
    "mine",
    "run",
    "sample",
    "solve_exact",
]
