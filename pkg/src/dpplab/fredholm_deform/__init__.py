"""Fredholm determinants, Fredholm series and deformations by marking and conditioning."""

from .operator import (
    ConditioningUndefinedError,
    CostGuardError,
    DegenerateOperatorError,
    DiscretizedOperator,
    GeneratingFunctionalValue,
    IllPosedDeformationError,
    SeriesResult,
    deformed_kernel,
    discretize,
    fredholm_det,
    fredholm_series,
    hadamard_tail,
    pgf_deformed,
)
from .symbols import (
    DeformationSymbol,
    Fermi,
    Indicator,
    OneMinusExpF,
    ScaledSymbol,
    TestFunction,
    ThinnedIndicator,
    Zero,
    bump,
    bump_f,
    fused_symbol,
    indicator_h,
    make_sigma_n,
    softened_indicator,
    zero_h,
)

__all__ = [
    "ConditioningUndefinedError",
    "CostGuardError",
    "DegenerateOperatorError",
    "DeformationSymbol",
    "DiscretizedOperator",
    "Fermi",
    "GeneratingFunctionalValue",
    "IllPosedDeformationError",
    "Indicator",
    "OneMinusExpF",
    "ScaledSymbol",
    "SeriesResult",
    "TestFunction",
    "ThinnedIndicator",
    "Zero",
    "bump",
    "bump_f",
    "deformed_kernel",
    "discretize",
    "fredholm_det",
    "fredholm_series",
    "fused_symbol",
    "hadamard_tail",
    "indicator_h",
    "make_sigma_n",
    "pgf_deformed",
    "softened_indicator",
    "zero_h",
]
