"""Finite-element gradient flow for a quartic Landau-de Gennes Q-tensor model."""

from .qtensor import (
    BasisSet,
    GradientTensor,
    ModelParams,
    SymTraceless,
    bulk_potential,
    equilibrium_s0,
    make_basis,
    order_parameter_2d,
    pointwise_curl,
    pointwise_div,
    project_st,
    truncate,
)

__all__ = [
    "BasisSet",
    "GradientTensor",
    "ModelParams",
    "SymTraceless",
    "bulk_potential",
    "equilibrium_s0",
    "make_basis",
    "order_parameter_2d",
    "pointwise_curl",
    "pointwise_div",
    "project_st",
    "truncate",
]
