"""Compressed-sensing estimation of sparse many-body Hamiltonians from local experiments."""
from .estimators import BasisPursuitDenoising, PauliSensing, ReweightedBasisPursuit
from .exceptions import (
    CapacityError,
    ConfigError,
    HamsenseError,
    InsufficientDataError,
    ParameterError,
    ValidationError,
)
from .experiment import (
    ExperimentConfig,
    LocalObservable,
    NoiseSpec,
    ProductState,
    exact_outcome,
    exact_outcomes,
    sample_configs,
    short_time_bound,
)
from .models import (
    ExchangeParams,
    LatticeParams,
    exchange_hamiltonian,
    optical_lattice_hamiltonian,
    planted_sparse,
    sparsity_report,
)
from .pauli import PauliString, decompose, reconstruct
from .sensing import SensingSystem, assemble, build_matrix, build_row
from .solver import RecoveryResult, SolverOptions, performance, solve_l1, solve_reweighted

__version__ = "0.1.0"

__all__ = [
    "BasisPursuitDenoising",
    "CapacityError",
    "ConfigError",
    "ExchangeParams",
    "ExperimentConfig",
    "HamsenseError",
    "InsufficientDataError",
    "LatticeParams",
    "LocalObservable",
    "NoiseSpec",
    "ParameterError",
    "PauliSensing",
    "PauliString",
    "ProductState",
    "RecoveryResult",
    "ReweightedBasisPursuit",
    "SensingSystem",
    "SolverOptions",
    "ValidationError",
    "assemble",
    "build_matrix",
    "build_row",
    "decompose",
    "exact_outcome",
    "exact_outcomes",
    "exchange_hamiltonian",
    "optical_lattice_hamiltonian",
    "performance",
    "planted_sparse",
    "reconstruct",
    "sample_configs",
    "short_time_bound",
    "solve_l1",
    "solve_reweighted",
    "sparsity_report",
]
