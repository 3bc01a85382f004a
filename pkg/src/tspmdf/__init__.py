"""Insertion heuristics for the Euclidean TSP, improved by a learned instance modifier."""
from .agnn import ModelParams, init_optimizer, init_params
from .checkpoint import load_checkpoint, save_checkpoint
from .codec import OffsetCode, decode, encode
from .constructors import farthest_insertion, nearest_insertion
from .core import Tour, TspInstance, brute_force_optimal, evaluate_on_original, tour_length
from .infer import SolveConfig, SolveResult, mdf_solve, random_modifier_solve
from .local_search import two_opt
from .train import TrainConfig, train, train_epoch
from .tsplib import generate_uniform, parse_tsplib, read_tsplib, serialize_tsplib

__all__ = [
    "ModelParams",
    "OffsetCode",
    "SolveConfig",
    "SolveResult",
    "Tour",
    "TrainConfig",
    "TspInstance",
    "brute_force_optimal",
    "decode",
    "encode",
    "evaluate_on_original",
    "farthest_insertion",
    "generate_uniform",
    "init_optimizer",
    "init_params",
    "load_checkpoint",
    "mdf_solve",
    "nearest_insertion",
    "parse_tsplib",
    "random_modifier_solve",
    "read_tsplib",
    "save_checkpoint",
    "serialize_tsplib",
    "tour_length",
    "train",
    "train_epoch",
    "two_opt",
]
