"""Generalized arcsine laws for occupation times of multiray systems.

Submodules
----------
gas          sampling and closed forms for the generalized arcsine law
maps         Boole's map and the cubic three-branch map
chain        multiray random-walk chain and its exact wandering rates
engine       deterministic parallel ensembles of occupation times
gof, inference
             goodness-of-fit, parameter recovery and asymptotic checks
experiments  end-to-end verification runs
cli          command-line entry point
"""
from ._version import __version__
from .chain import (ChainModel, ChainState, WanderingTable, exact_survival, laplace_Q,
                    regvar_index)
from .engine import EmpiricalLaw, EnsembleSpec, run_ensemble
from .exceptions import (AbsorbedError, ArcsineLabError, BoundaryError, NumericalError,
                         ParameterError, SizeError, TailCertificationError,
                         UnsupportedMarginalError)
from .gas import (GasParams, LaplaceQuery, double_laplace_closed_form, gas_mean, lamperti_cdf,
                  lamperti_pdf, marginal_params, sample_gas, sample_one_sided_stable)
from .gof import GofReport, cvm_distance, energy_distance, ks_distance
from .inference import (FitResult, GeneralizedArcsineFitter, OccupationRatioTransformer,
                        fit_gas)
from .maps import MapModel, boole, cubic3
from .measures import InitialMeasure

__all__ = [
    "__version__",
    "AbsorbedError", "ArcsineLabError", "BoundaryError", "NumericalError", "ParameterError",
    "SizeError", "TailCertificationError", "UnsupportedMarginalError",
    "ChainModel", "ChainState", "WanderingTable", "exact_survival", "laplace_Q", "regvar_index",
    "EmpiricalLaw", "EnsembleSpec", "run_ensemble",
    "GasParams", "LaplaceQuery", "double_laplace_closed_form", "gas_mean", "lamperti_cdf",
    "lamperti_pdf", "marginal_params", "sample_gas", "sample_one_sided_stable",
    "GofReport", "cvm_distance", "energy_distance", "ks_distance",
    "FitResult", "GeneralizedArcsineFitter", "OccupationRatioTransformer", "fit_gas",
    "MapModel", "boole", "cubic3", "InitialMeasure",
]
