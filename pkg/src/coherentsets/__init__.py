"""Coherent sets for aperiodically driven dynamical systems.

Transfer operators of the driven dynamics are discretized on uniform box
partitions, composed into matrix cocycles, and their slowly decaying
singular-vector modes are pushed forward in time.  Thresholding those modes,
with measures matched across times, yields families of sets that the dynamics
carries into each other with little loss of mass.
"""

from .grid import BoxSet, DomainError, Grid, components, locate, measure, test_points
from .systems import (ADJACENCY_4, DrivingTrack, FlowSystem, IntegrationError,
                      MapFamily, driving_state, driving_symbols, eval_H, eval_T,
                      flow, flow_points, lorenz_rhs, map_family, rotate, wave_rhs)
from .transfer import (Cocycle, TransferMatrix, apply_density, compose,
                       load_coordinate_matrix, retime, rho_hat,
                       save_coordinate_matrix, ulam_flow, ulam_flow_multi, ulam_map)
from .oseledets import (NonConvergenceError, OseledetsApprox, SpectralResult,
                        align_parity, convergence_delta, normalize_l1,
                        oseledets_approx, oseledets_from_matrices,
                        oseledets_from_steps, positive_part_bound,
                        resolve_degenerate_sectors, sign_convention, top_k_singular)
from .coherent import (CoherentFamily, PairResult, ThresholdScan, connectify,
                       eta_match, optimal_pair, optimal_sequence, rho_profile,
                       threshold_set)
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, make_config
from .experiments import ExperimentResult, run_experiment

__version__ = "0.1.0"

__all__ = [
    "Grid", "BoxSet", "DomainError", "locate", "test_points", "components", "measure",
    "MapFamily", "map_family", "eval_H", "eval_T", "rotate",
    "DrivingTrack", "driving_symbols", "ADJACENCY_4",
    "FlowSystem", "lorenz_rhs", "wave_rhs", "driving_state", "flow", "flow_points",
    "IntegrationError",
    "TransferMatrix", "Cocycle", "ulam_map", "ulam_flow", "ulam_flow_multi",
    "compose", "retime", "apply_density", "rho_hat",
    "save_coordinate_matrix", "load_coordinate_matrix",
    "SpectralResult", "OseledetsApprox", "NonConvergenceError",
    "top_k_singular", "oseledets_approx", "oseledets_from_steps",
    "oseledets_from_matrices", "convergence_delta", "positive_part_bound",
    "normalize_l1", "sign_convention", "align_parity", "resolve_degenerate_sectors",
    "ThresholdScan", "PairResult", "CoherentFamily",
    "threshold_set", "eta_match", "optimal_pair", "optimal_sequence",
    "connectify", "rho_profile",
    "ExperimentConfig", "ConfigError", "make_config", "EXPERIMENTS",
    "ExperimentResult", "run_experiment",
    "__version__",
]
