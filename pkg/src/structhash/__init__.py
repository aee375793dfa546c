"""Learned binary codes whose weighted Hamming ranking optimises a ranking measure."""

from .data import (
    DataFormatError,
    DataMatrix,
    KernelMap,
    KernelMapConfig,
    QueryNeighborhood,
    Standardization,
    fit_kernel_map,
    ground_truth_by_label,
    ground_truth_by_percentile,
    kernel_feature_map,
    load_dataset,
    sample_neighborhood,
    standardize,
)
from .hashing import HashLearnConfig, HashModel, Hyperplane, learn_hash_function, train_structhash
from .inference import brute_force_most_violated, delta_psi, infer_most_violated, psi
from .lp import MasterSolution, SolverError, solve_restricted_master
from .measures import Interleaving, MeasureSpec, label_loss, score
from .pipeline import TrainConfig, evaluate_model, fit
from .retrieval import CodeMatrix, encode, evaluate, lsh_baseline, rank_database, weighted_hamming
from .solver import SolverConfig, train_w

__version__ = "0.1.0"

__all__ = [
    "CodeMatrix",
    "DataFormatError",
    "DataMatrix",
    "HashLearnConfig",
    "HashModel",
    "Hyperplane",
    "Interleaving",
    "KernelMap",
    "KernelMapConfig",
    "MasterSolution",
    "MeasureSpec",
    "QueryNeighborhood",
    "SolverConfig",
    "SolverError",
    "Standardization",
    "TrainConfig",
    "brute_force_most_violated",
    "delta_psi",
    "encode",
    "evaluate",
    "evaluate_model",
    "fit",
    "fit_kernel_map",
    "ground_truth_by_label",
    "ground_truth_by_percentile",
    "infer_most_violated",
    "kernel_feature_map",
    "label_loss",
    "learn_hash_function",
    "load_dataset",
    "lsh_baseline",
    "psi",
    "rank_database",
    "sample_neighborhood",
    "score",
    "solve_restricted_master",
    "standardize",
    "train_structhash",
    "train_w",
    "weighted_hamming",
]
