"""Staggered-grid incompressible Navier-Stokes solver."""

from ..trajio import Trajectory, TrajectoryMeta
from .core import (
    DIV_TOL,
    CaseSetup,
    FlowState,
    SolverParams,
    build_case,
    divergence,
    initial_state,
    kinetic_energy,
    project_velocity,
    run_simulation,
    step,
    suggest_dt,
)
from .poisson import PoissonSolver, solve_pressure_poisson

__all__ = [
    "DIV_TOL",
    "CaseSetup",
    "FlowState",
    "SolverParams",
    "Trajectory",
    "TrajectoryMeta",
    "PoissonSolver",
    "build_case",
    "divergence",
    "initial_state",
    "kinetic_energy",
    "project_velocity",
    "run_simulation",
    "solve_pressure_poisson",
    "step",
    "suggest_dt",
]
