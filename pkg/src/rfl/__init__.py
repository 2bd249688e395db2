"""Minimax-robust linear filtering of functionals of stationary processes
observed with noise and with missing observation intervals."""

__version__ = "0.1.0"

from .errors import ConfigParse, NumericalFailure, RFLError, ValidationError
from .filtering import FilterOptions, FilterSolution, solve_filter
from .minimax import Contamination, Known, L1Ball, L2Ball, lfd_solve, saddle_verify
from .oracle import oracle_solve
from .problem import ExpWindow, MissingPattern, TabulatedWeight, build_pattern, build_problem
from .spectra import FrequencyGrid, Rational, Tabulated, eval_density, ou_density

__all__ = [
    "ConfigParse", "NumericalFailure", "RFLError", "ValidationError",
    "FilterOptions", "FilterSolution", "solve_filter",
    "Contamination", "Known", "L1Ball", "L2Ball", "lfd_solve", "saddle_verify",
    "oracle_solve",
    "ExpWindow", "MissingPattern", "TabulatedWeight", "build_pattern", "build_problem",
    "FrequencyGrid", "Rational", "Tabulated", "eval_density", "ou_density",
]
