"""Simulators and closed forms for classical-channel gravity models.

Modules
-------
model        parameters and quadratic generators (KTM, dissipative KTM, linearized TD, Caldeira)
gaussian     moment dynamics, Lyapunov steady states, covariance validity
hilbert      dense density-matrix oracle on a truncated number basis
trajectories measurement + feedback stochastic unraveling
analytics    growth rates, asymptotic energies, effective temperatures, eta coefficients
cli          JSON-configured experiment runner
"""

from .analytics import (
    caldeira_asymptote,
    effective_temperature,
    ktm_asymptotic_energy,
    ktm_growth_rate,
    td_asymptotic_energy,
    td_growth_rate,
)
from .errors import (
    CovarianceViolation,
    LeakageError,
    NormCollapse,
    NotDissipative,
    NumericalFailure,
    StepSizeError,
)
from .eta import EtaSet, eta_closed, eta_quadrature
from .gaussian import GaussianState, energy, integrate_moments, moment_rhs, steady_state, vacuum_state
from .generator import LindbladTerm, QuadraticGenerator, lindblad_to_generator
from .model import (
    CaldeiraParams,
    KtmParams,
    TdLinearParams,
    build_caldeira_generator,
    build_dissipative_ktm_generator,
    build_generator,
    build_ktm_generator,
    build_td_linear_generator,
    split_com_rel,
)
from .units import UnitConstants

__version__ = "0.1.0"

__all__ = [
    "CaldeiraParams",
    "CovarianceViolation",
    "EtaSet",
    "GaussianState",
    "KtmParams",
    "LeakageError",
    "LindbladTerm",
    "NormCollapse",
    "NotDissipative",
    "NumericalFailure",
    "QuadraticGenerator",
    "StepSizeError",
    "TdLinearParams",
    "UnitConstants",
    "build_caldeira_generator",
    "build_dissipative_ktm_generator",
    "build_generator",
    "build_ktm_generator",
    "build_td_linear_generator",
    "caldeira_asymptote",
    "effective_temperature",
    "energy",
    "eta_closed",
    "eta_quadrature",
    "integrate_moments",
    "ktm_asymptotic_energy",
    "ktm_growth_rate",
    "lindblad_to_generator",
    "moment_rhs",
    "split_com_rel",
    "steady_state",
    "td_asymptotic_energy",
    "td_growth_rate",
    "vacuum_state",
]
