"""Discrete solvers and checks for doubly nonlinear parabolic problems driven
by the mixed local and nonlocal p-Laplacian with a singular source."""

from .evolution import EvolutionProblem, Trajectory, energy_ledger, evolve, rothe_step, time_average_g
from .functionals import StationaryProblem, energy_J, energy_L, grad_J, grad_L
from .grid import Grid, build_grid
from .minimize import MinimizeError, MinimizeOptions, minimize
from .operators import NonlocalKernel, assemble_kernel, diffusion_energy, diffusion_grad
from .params import ModelParams, ParamsError, validate
from .stationary import (
    build_subsolution,
    build_supersolution,
    choose_barriers,
    first_eigenpair,
    singular_solution,
    solve_P7,
    solve_S_lambda,
)
from .verify import CheckConfig, VerifyReport, run_suite

__version__ = "0.1.0"
