"""Optimization of state polynomials via moment relaxations."""
from .algebra import (Alphabet, Evaluation, ModeError, NCStatePoly, ParseError, StatePoly, evaluate,
                      involution, mul, parse_poly, sigma, to_string)
from .quotient import QuotientContext
from .moment import Constraint, Problem, assemble, build_basis, solve_relaxation
from .relax import RelaxOptions, build_relaxation
from .scenarios import NetworkScenario, builtin, builtin_examples, parse_problem, verify_model
from .solver import SDPInstance, SolverOptions, export_sdpa, import_sdpa, solve

__version__ = "0.1.0"
