"""Sparse precision matrices for basis-function spatial models."""

from ._core import (
    ConfigError,
    DataError,
    LikelihoodKernel,
    NotSpdError,
    NumericError,
    basis_matrix,
    crps,
    dc_gradient,
    duality_gap,
    effective_df,
    estimate_nugget,
    fit,
    full_nll,
    glasso,
    kernel,
    krige,
    penalty,
    recovery_metrics,
    reduced_nll,
    simulate,
    total_nll,
    wendland,
)

__all__ = [
    "ConfigError",
    "DataError",
    "LikelihoodKernel",
    "NotSpdError",
    "NumericError",
    "basis_matrix",
    "crps",
    "dc_gradient",
    "duality_gap",
    "effective_df",
    "estimate_nugget",
    "fit",
    "full_nll",
    "glasso",
    "kernel",
    "krige",
    "penalty",
    "recovery_metrics",
    "reduced_nll",
    "simulate",
    "total_nll",
    "wendland",
]
