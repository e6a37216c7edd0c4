"""Quadrature rules, reference measures, kernel fields and special functions."""

from .airy import AiryRangeError, AiryValue, airy_ai, airy_arrays, airy_asymptotic, airy_series
from .kernels import (
    KernelField,
    ReferenceMeasure,
    airy_field,
    airy_kernel,
    airy_kernel_matrix,
    discrete_sine_field,
    discrete_sine_kernel,
    sine_field,
    sine_kernel,
    zero_field,
)
from .quadrature import QuadratureRule, composite_gauss_legendre, gauss_legendre

__all__ = [
    "AiryRangeError",
    "AiryValue",
    "KernelField",
    "QuadratureRule",
    "ReferenceMeasure",
    "airy_ai",
    "airy_arrays",
    "airy_asymptotic",
    "airy_field",
    "airy_kernel",
    "airy_kernel_matrix",
    "airy_series",
    "composite_gauss_legendre",
    "discrete_sine_field",
    "discrete_sine_kernel",
    "gauss_legendre",
    "sine_field",
    "sine_kernel",
    "zero_field",
]
