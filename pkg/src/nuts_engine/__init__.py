"""Gradient-based MCMC: HMC, the No-U-Turn Sampler, dual averaging and benchmarks."""
from .adapt import DualAveragingState, da_update, find_reasonable_epsilon
from .baselines import RwmConfig, gibbs_mvn_run, rwm_run, rwm_tune_scale
from .chain import ChainOutput
from .diagnostics import (EssReport, MomentReference, ReferenceMoments, autocorrelation, ess,
                          ess_report, h_discrepancy, trajectory_histogram)
from .errors import (ConfigurationError, ControllerError, DataParseError, EvaluationError,
                     InitializationError, NutsEngineError, TuningError)
from .estimators import GibbsSampler, HMCSampler, NUTSSampler, RWMSampler
from .hamiltonian import PhaseState, RngStream, leapfrog
from .harness import ExperimentConfig, compare_samplers, run_experiment
from .hmc import HmcConfig, hmc_run
from .model import (HierarchicalLogisticModel, LogisticRegressionModel, MvnModel, MvnSpec,
                    StochasticVolatilityModel, TargetModel, build_target, check_gradient,
                    eval_model)
from .nuts import NutsConfig, build_tree, nuts_iteration, nuts_run

__version__ = "0.1.0"

__all__ = [
    "ChainOutput", "ConfigurationError", "ControllerError", "DataParseError",
    "DualAveragingState", "EssReport", "EvaluationError", "ExperimentConfig", "GibbsSampler",
    "HMCSampler", "HierarchicalLogisticModel", "HmcConfig", "InitializationError",
    "LogisticRegressionModel", "MomentReference", "MvnModel", "MvnSpec", "NUTSSampler",
    "NutsConfig", "NutsEngineError", "PhaseState", "RWMSampler", "ReferenceMoments",
    "RngStream", "RwmConfig", "StochasticVolatilityModel", "TargetModel", "TuningError",
    "autocorrelation", "build_target", "build_tree", "check_gradient", "compare_samplers",
    "da_update", "ess", "ess_report", "eval_model", "find_reasonable_epsilon", "gibbs_mvn_run",
    "h_discrepancy", "hmc_run", "leapfrog", "nuts_iteration", "nuts_run", "run_experiment",
    "rwm_run", "rwm_tune_scale", "trajectory_histogram",
]
