"""Python interface to the bolab C++ core."""

from ._core import (
    Geometry,
    RealField,
    beta,
    beta_derivatives,
    box,
    circle,
    eigenvalues,
    evolve,
    explicit_formula,
    field,
    hamiltonians,
    initial,
    kappa_min,
    line,
    suites,
    verify,
)

__all__ = [
    "Geometry",
    "RealField",
    "beta",
    "beta_derivatives",
    "box",
    "circle",
    "eigenvalues",
    "evolve",
    "explicit_formula",
    "field",
    "hamiltonians",
    "initial",
    "kappa_min",
    "line",
    "suites",
    "verify",
]
