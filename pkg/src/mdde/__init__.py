"""Impulsive measure delay differential equations.

Kurzweil-Stieltjes quadrature, a method-of-steps solver, the jump-removing
transform, oscillation/nonoscillation tests and a fixed-point certificate.
"""

from .criteria import (Certificate, Classification, CriterionReport, HypothesisError,
                       Verdict, classify_trajectory, iterate_certificate,
                       nonoscillation_criterion, oscillation_criterion)
from .expr import evaluate, parse, to_text
from .problem import (ImpulseGenerator, ImpulseSchedule, MeasureDDEProblem, P_of, P_view,
                      product_factor, validate)
from .regulated import (Constant, Piecewise, PiecewiseLinear, RegulatedFn, StepFunction,
                        from_expr)
from .solver import ProblemError, Trajectory, residual, solve
from .stieltjes import Integrator, QuadResult, alexiewicz_norm, integrate, integrate_dt
from .transform import auxiliary_problem, to_impulsive, to_nonimpulsive

__version__ = "0.1.0"
