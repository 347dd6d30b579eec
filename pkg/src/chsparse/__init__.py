"""Sparse optimal control of a phase-field tumour growth model with logarithmic potential."""

from .control import Control
from .grid import GridSpec, ScalarField, build_grid
from .kernels import BACKEND
from .model import CostParams, ModelParams
from .state import InitialData, SolverOptions, StateTrajectory, TimeGrid, solve_state

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Control",
    "CostParams",
    "GridSpec",
    "InitialData",
    "ModelParams",
    "ScalarField",
    "SolverOptions",
    "StateTrajectory",
    "TimeGrid",
    "build_grid",
    "solve_state",
]
