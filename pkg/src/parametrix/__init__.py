"""Parametrix construction of heat kernels for Levy-type operators in dimension one."""
from .coefficients import (CoefficientSet, DriftParameters, ProductForm, check_assumptions, epsilon0_window,
                           example_catalog)
from .engine import (BuildResult, EngineConfig, KernelTable, ParametrixEngine, assemble_p, compose, mass,
                     read_csv, export_csv)
from .errors import (AssumptionViolation, BudgetError, ConfigError, DomainError, ParametrixError, QuadratureError,
                     RangeError, ResolutionError, UnsupportedError)
from .profiles import LevyProfile, log_profile, oscillating_profile, power_profile, upsilon

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolation", "BudgetError", "BuildResult", "CoefficientSet", "ConfigError", "DomainError",
    "DriftParameters", "EngineConfig", "KernelTable", "LevyProfile", "ParametrixEngine", "ParametrixError",
    "ProductForm", "QuadratureError", "RangeError", "ResolutionError", "UnsupportedError", "assemble_p",
    "check_assumptions", "compose", "epsilon0_window", "example_catalog", "export_csv", "log_profile", "mass",
    "oscillating_profile", "power_profile", "read_csv", "upsilon",
]
