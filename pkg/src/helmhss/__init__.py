"""Shifted-HSS preconditioned finite-element solvers for the 2-D Helmholtz equation."""
from .driver import ExperimentConfig, ExperimentReport, reproduce_table, run_experiment
from .hss import HssConfig, HssPreconditioner, contraction_bound
from .mesh import build_hierarchy, build_mesh, resolution_for

__all__ = [
    "ExperimentConfig", "ExperimentReport", "HssConfig", "HssPreconditioner",
    "build_hierarchy", "build_mesh", "contraction_bound", "reproduce_table",
    "resolution_for", "run_experiment",
]
__version__ = "0.1.0"
