"""Orthogonal and Stiefel matrices as compact-WY products of Householder
reflections, with analytic gradients, Riemannian and stochastic descent,
a FLOP model, and a benchmark CLI."""

from . import cli, cwy, flops, householder, linalg, optim, riemannian, tcwy
from .errors import (
    DecompositionDrift,
    NoConvergence,
    NotOnManifold,
    NotOrthogonal,
    NumericalContractError,
    RankDeficient,
    RequiresStrictTruncation,
    ShapeMismatch,
    SingularDiagonal,
    SolveFailure,
    UnknownMethod,
    WrongDeterminant,
    ZeroVector,
)
from .householder import HouseholderStack
from .linalg import SkewParam

__all__ = [
    "cli",
    "cwy",
    "flops",
    "householder",
    "linalg",
    "optim",
    "riemannian",
    "tcwy",
    "HouseholderStack",
    "SkewParam",
    "NumericalContractError",
    "DecompositionDrift",
    "NoConvergence",
    "NotOnManifold",
    "NotOrthogonal",
    "RankDeficient",
    "RequiresStrictTruncation",
    "ShapeMismatch",
    "SingularDiagonal",
    "SolveFailure",
    "UnknownMethod",
    "WrongDeterminant",
    "ZeroVector",
]

__version__ = "0.1.0"
