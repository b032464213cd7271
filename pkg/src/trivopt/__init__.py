"""Trivialisation-based optimisation on matrix manifolds."""
from . import curvature, dense, expm, manifolds, optimizers, problems, trivialize, verify
from ._jit import backend
from .curvature import CurvatureProfile, step_size
from .errors import (ConstraintError, ContractError, DivergenceError, DomainError, ShapeError, SingularMatrixError,
                     TrivoptError)
from .manifolds import SPD, Euclidean, Grassmannian, Product, SpecialOrthogonal, Sphere, Stiefel
from .optimizers import GD, Adam, Momentum
from .trivialize import Always, EveryK, GradRatio, Never, TrivRun, run, step

__version__ = "0.1.0"

__all__ = [
    "backend",
    "curvature",
    "dense",
    "manifolds",
    "optimizers",
    "problems",
    "trivialize",
    "verify",
    "CurvatureProfile",
    "step_size",
    "TrivoptError",
    "ShapeError",
    "ContractError",
    "DomainError",
    "ConstraintError",
    "SingularMatrixError",
    "DivergenceError",
    "expm",
    "SpecialOrthogonal",
    "Stiefel",
    "Grassmannian",
    "SPD",
    "Sphere",
    "Euclidean",
    "Product",
    "GD",
    "Momentum",
    "Adam",
    "TrivRun",
    "Never",
    "Always",
    "EveryK",
    "GradRatio",
    "step",
    "run",
]
