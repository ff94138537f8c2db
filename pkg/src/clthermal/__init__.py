"""Exact Gaussian evolution under the Caldeira-Leggett master equation."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ChiFunction,
    Form,
    GaussianChi,
    ModelParams,
    moments,
    require_valid,
    uncertainty_product,
    validate,
    validity_ratios,
)
from .densmat import Basis, ReferenceKind, ThermalReference, element, element_grid  # noqa: E402
from .diagnostics import (  # noqa: E402
    DecayFit,
    ProductState,
    diffusion_check,
    equilibrium_distance,
    evolve_product,
    fit_decay,
)
from .errors import *  # noqa: E402,F401,F403
from .general import LinearPDECoeffs, build_ode, decouple, solve_coefficients  # noqa: E402
from .propagators import evolve, evolve_gaussian, evolve_pointwise, kernel, stationary_chi  # noqa: E402

__all__ = [
    "__version__",
    "Basis",
    "ChiFunction",
    "DecayFit",
    "Form",
    "GaussianChi",
    "LinearPDECoeffs",
    "ModelParams",
    "ProductState",
    "ReferenceKind",
    "ThermalReference",
    "build_ode",
    "decouple",
    "diffusion_check",
    "element",
    "element_grid",
    "equilibrium_distance",
    "evolve",
    "evolve_gaussian",
    "evolve_pointwise",
    "evolve_product",
    "fit_decay",
    "kernel",
    "moments",
    "require_valid",
    "solve_coefficients",
    "stationary_chi",
    "uncertainty_product",
    "validate",
    "validity_ratios",
]
