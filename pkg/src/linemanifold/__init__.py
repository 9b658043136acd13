"""Bundle adjustment with minimal Riemannian line parameterizations."""

from .factors import CameraIntrinsics, RobustLoss
from .graph import FactorGraph, GraphValidationError, GroundTruth
from .lines import (
    EndpointLine,
    OrthonormalLine,
    ParallelGroup,
    PluckerLine,
    RiemanLine,
    count_parameters,
    plucker_from_endpoints,
    rieman_from_plucker,
)
from .manifold import PoseSE3
from .solver import Method, SingularSystemError, SolveConfig, SolveReport, assemble, lm_solve, solve
from .synth import GenerationError, PerturbScales, SceneSpec, generate, perturb

__all__ = [
    "CameraIntrinsics", "RobustLoss", "FactorGraph", "GraphValidationError", "GroundTruth",
    "EndpointLine", "OrthonormalLine", "ParallelGroup", "PluckerLine", "RiemanLine",
    "count_parameters", "plucker_from_endpoints", "rieman_from_plucker", "PoseSE3",
    "Method", "SingularSystemError", "SolveConfig", "SolveReport", "assemble", "lm_solve", "solve",
    "GenerationError", "PerturbScales", "SceneSpec", "generate", "perturb",
]
