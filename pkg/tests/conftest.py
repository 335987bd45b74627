import math

import numpy as np
import pytest
from hypothesis import settings

from mdde.problem import ImpulseGenerator, ImpulseSchedule, MeasureDDEProblem
from mdde.regulated import Constant, from_expr
from mdde.stieltjes import Integrator

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def const_problem(p=1.0, tau=1.0, t0=0.0, phi=1.0, points=(), b=(), end=200.0):
    return MeasureDDEProblem(Constant(p, t0, end), Integrator.identity(), tau, t0,
                             Constant(phi, t0 - tau, t0), ImpulseSchedule(points, b))


def oscillatory_t4_problem():
    """t^4 against g = 2t^3, delay 2, impulses 4 + 3k with b = 1/2."""
    p = from_expr("t^4 * chi(4, inf) * ae_except_rationals", 2.0)
    g = Integrator(from_expr("6*t^2", 2.0), base_point=2.0, base_value=16.0)
    sched = ImpulseSchedule(generator=ImpulseGenerator(4.0, 3.0, 0.5))
    return MeasureDDEProblem(p, g, 2.0, 2.0, Constant(1.0, 0.0, 2.0), sched)


def inverse_square_problem():
    """p = 1/t^2, identity g, delay 1, no impulses."""
    p = from_expr("1/t^2 * ae_except_rationals", 2.0)
    return MeasureDDEProblem(p, Integrator.identity(), 1.0, 2.0, Constant(1.0, 1.0, 2.0))


def scalar_fixed_point(c):
    """Smallest root of u = c e^u by bisection on [0, 1] (needs c < 1/e)."""
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - c * math.exp(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
