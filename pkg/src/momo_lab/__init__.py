"""Finite-scale toolkit for Moebius orthogonality along sets of full logarithmic density."""
from ._kernels import BACKEND
from .arith import (
    ArithTable,
    MultipleBase,
    bfree_set,
    build_arith_table,
    chebyshev_psi,
    load_table,
    mertens,
    save_table,
)
from .averaging import (
    IndexSet,
    cesaro_avg,
    log_avg,
    log_density_at,
    natural_density_at,
    summation_by_parts,
)
from .errors import CapacityError, DomainError, HorizonError, MomoLabError
from .extract import DensityCertificate
from .pipelines import ExperimentConfig, PipelineReport, run_config

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ArithTable",
    "MultipleBase",
    "bfree_set",
    "build_arith_table",
    "chebyshev_psi",
    "load_table",
    "mertens",
    "save_table",
    "IndexSet",
    "cesaro_avg",
    "log_avg",
    "log_density_at",
    "natural_density_at",
    "summation_by_parts",
    "CapacityError",
    "DomainError",
    "HorizonError",
    "MomoLabError",
    "DensityCertificate",
    "ExperimentConfig",
    "PipelineReport",
    "run_config",
]
