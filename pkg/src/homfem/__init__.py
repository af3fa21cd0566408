"""Finite elements from declarative configs, with two-scale homogenization.

The main entry points are :func:`parse_problem` / :class:`Problem` for
single problems, :func:`solve_declarative` for the full solve-and-write
pipeline, and :mod:`homfem.homogenization` for corrector problems and
homogenized coefficients.
"""
from importlib import resources

from .config import ProblemConfig, config_from_dict, parse_problem, parse_problem_text
from .equations import parse_call, parse_equation
from .errors import (ConfigError, ConstraintError, ConvergenceError,
                     DependencyCycleError, EngineError, HomfemError, MeshError,
                     ParseError, PhaseError, SingularMatrixError, SolverError,
                     TaskFailedError, TermError)
from .mesh import Mesh, generate_block_mesh
from .problem import Problem, resolve_materials, solve_declarative
from .vtk import read_vtk, read_vtk_with_data, write_vtk

__version__ = '0.1.0'


def data_path(name):
    """Filesystem path of a bundled example configuration."""
    return str(resources.files(__package__).joinpath('data', name))


__all__ = ['ConfigError', 'ConstraintError', 'ConvergenceError',
           'DependencyCycleError', 'EngineError', 'HomfemError', 'Mesh',
           'MeshError', 'ParseError', 'PhaseError', 'Problem', 'ProblemConfig',
           'SingularMatrixError', 'SolverError', 'TaskFailedError', 'TermError',
           'config_from_dict', 'data_path', 'generate_block_mesh',
           'parse_call', 'parse_equation', 'parse_problem',
           'parse_problem_text', 'read_vtk', 'read_vtk_with_data',
           'resolve_materials', 'solve_declarative', 'write_vtk']
