"""Simulation and convergence checks for a Black-Scholes market whose drift and volatility
switch with a finite continuous-time Markov chain, and for its N-step discrete approximation."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (BadTimePoint, ConfigParse, IoFailure, ModelInvalid, NegativeRate, NonSquare,
                     OutOfHorizon, RegimeLabError, RowMismatch, ToleranceNotReached, UnsupportedOrder,
                     ZeroExitRate, ZeroRate)
from .markov_core import (GeneratorMatrix, RegimeParams, TimeGrid, Variant, discrete_transition_matrix,
                          rate_asymptotics_check, transition_matrix, validate_generator)
from .ctmc_sim import (CtmcPath, evaluate_path, jump_count_mgf_check, jump_law_compare,
                       jump_law_convergence, sample_ctmc_path)
from .limit_sim import (CfSpec, LimitSample, limit_cf, limit_cf_exact, price_european_call,
                        sample_limit_fdd)
from .discrete_scheme import (DiscretePath, ReturnFamily, discrete_cf, discrete_cf_exact,
                              sample_discrete_chain, sample_discrete_path, sample_returns,
                              verify_conditions)
from .convergence_lab import (cf_convergence, cf_rate_check, fdd_compare, price_convergence,
                              tightness_diagnostics)
from .reports import ConvergenceReport, TightnessReport
from .rng import SeedSpec

__all__ = [
    "BadTimePoint", "CfSpec", "ConfigParse", "ConvergenceReport", "CtmcPath", "DiscretePath",
    "GeneratorMatrix", "IoFailure", "LimitSample", "ModelInvalid", "NegativeRate", "NonSquare",
    "OutOfHorizon", "RegimeLabError", "RegimeParams", "ReturnFamily", "RowMismatch", "SeedSpec",
    "TightnessReport", "TimeGrid", "ToleranceNotReached", "UnsupportedOrder", "Variant",
    "ZeroExitRate", "ZeroRate", "cf_convergence", "cf_rate_check", "discrete_cf", "discrete_cf_exact",
    "discrete_transition_matrix", "evaluate_path", "fdd_compare", "jump_count_mgf_check",
    "jump_law_compare", "jump_law_convergence", "limit_cf", "limit_cf_exact", "price_convergence",
    "price_european_call", "rate_asymptotics_check", "sample_ctmc_path", "sample_discrete_chain",
    "sample_discrete_path", "sample_limit_fdd", "sample_returns", "tightness_diagnostics",
    "transition_matrix", "validate_generator", "verify_conditions",
]
