"""Correspondence between the impulsive equation and a jump-free one.

With ``Pi(t) = prod_{sigma <= t_k < t} (1 + b_k)``,

    x(t) = y(t) / Pi(t),        y(t) = Pi(t) x(t).

Dividing by ``Pi`` cancels every impulse jump of ``y``, so ``x`` is continuous
at each ``t_k >= sigma`` and solves

    Dx = -p(t) prod_{max(sigma, t - tau) <= t_k < t} (1 + b_k)^{-1} x(t - tau) Dg.

When every ``b_k > -1`` the factor is positive and ``x`` and ``y`` share signs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import ImpulseSchedule, MeasureDDEProblem, product_factor
from .regulated import Product, RegulatedFn, Restricted, StepFunction
from .solver import Trajectory
from .stieltjes import Integrator

__all__ = [
    "TransformError", "to_impulsive", "to_nonimpulsive", "jump_magnitudes",
    "NonimpulsiveProblem", "auxiliary_problem",
]


class TransformError(ValueError):
    pass


def _factors(sched, sigma, horizon):
    """Impulse times in ``[sigma, horizon]`` and the cumulative products
    ``cp[j] = prod of the first j factors``."""
    tk, bk = sched.between(sigma, np.nextafter(horizon, math.inf))
    if np.any(bk == -1.0):
        bad = tk[bk == -1.0][0]
        raise TransformError(f"b_k = -1 at t_k = {bad}: the transform is undefined")
    cp = np.concatenate([[1.0], np.cumprod(1.0 + bk)])
    return tk, bk, cp


def _apply(traj, sched, sigma, direction):
    """Multiply (direction=+1) or divide (direction=-1) by ``Pi``."""
    tk, bk, cp = _factors(sched, sigma, traj.horizon)
    left = cp[np.searchsorted(tk, traj.t, side="left")]
    y = traj.y * left if direction > 0 else traj.y / left
    post = {}
    impulses = set(tk.tolist())
    for s, r in traj.post_jump.items():
        if s in impulses:
            continue  # impulse jumps are rebuilt below (or cancelled)
        f = cp[np.searchsorted(tk, s, side="right")]
        post[s] = r * f if direction > 0 else r / f
    on_grid = []
    if direction > 0:
        idx = np.searchsorted(traj.t, tk)
        for i, t_k, b_k in zip(idx, tk, bk):
            if i < traj.t.size and traj.t[i] == t_k:
                post[float(t_k)] = (1.0 + b_k) * y[i]
                on_grid.append(float(t_k))
    info = dict(traj.info)
    info["transform_sigma"] = float(sigma)
    return Trajectory(traj.t.copy(), y, post, traj.t0, traj.tau, info, tuple(on_grid))


def to_nonimpulsive(y: Trajectory, sched: ImpulseSchedule, sigma: float) -> Trajectory:
    """``x = y / Pi``; the result carries no impulse jumps at ``t_k >= sigma``."""
    return _apply(y, sched, sigma, -1)


def to_impulsive(x: Trajectory, sched: ImpulseSchedule, sigma: float) -> Trajectory:
    """``y = Pi * x`` with ``y(t_k+) = (1 + b_k) y(t_k)`` at every grid impulse."""
    return _apply(x, sched, sigma, +1)


def jump_magnitudes(y: Trajectory, sched: ImpulseSchedule, sigma: float) -> np.ndarray:
    """Relative jump ``|x(t_k+) - x(t_k)| / |x(t_k)|`` of ``x = y / Pi`` at each
    grid impulse ``t_k >= sigma`` (0 where ``x(t_k) = 0``)."""
    tk, _, cp = _factors(sched, sigma, y.horizon)
    out = []
    for j, t_k in enumerate(tk):
        r = y.post_jump.get(float(t_k))
        if r is None:
            continue
        i = int(np.searchsorted(y.t, t_k))
        xl = y.y[i] / cp[j]
        xr = r / cp[j + 1]
        out.append(abs(xr - xl) / abs(xl) if xl != 0 else abs(xr))
    return np.asarray(out)


@dataclass(frozen=True)
class NonimpulsiveProblem:
    """Jump-free auxiliary problem; the correspondence is claimed on
    ``[valid_from, horizon]`` with ``valid_from = sigma + tau``."""

    P: RegulatedFn
    g: Integrator
    tau: float
    sigma: float
    phi: RegulatedFn
    horizon: float

    @property
    def valid_from(self):
        return self.sigma + self.tau

    def as_problem(self) -> MeasureDDEProblem:
        return MeasureDDEProblem(self.P, self.g, self.tau, self.sigma, self.phi,
                                 ImpulseSchedule())


def auxiliary_problem(prob: MeasureDDEProblem, horizon: float, sigma: float | None = None,
                      phi: RegulatedFn | None = None) -> NonimpulsiveProblem:
    """Build the jump-free problem whose solution maps to ``prob``'s by ``Pi``.

    ``sigma`` defaults to ``t0``, where the history is ``prob.phi``.  A later
    ``sigma`` needs the history of ``y`` on ``[sigma - tau, sigma]``.
    """
    tau = prob.tau
    if sigma is None:
        sigma = prob.t0
    if phi is None:
        if sigma != prob.t0:
            raise TransformError("a history on [sigma - tau, sigma] is required when sigma != t0")
        phi = prob.phi
    if not horizon > sigma:
        raise TransformError("horizon must exceed sigma")
    if any(b == -1.0 for b in prob.impulses.between(sigma, horizon)[1]):
        raise TransformError("b_k = -1 in range: the transform is undefined")
    pts, _ = prob.impulses.between(sigma, horizon)
    cuts = np.unique(np.concatenate([pts, pts + tau]))
    cuts = cuts[(cuts > sigma) & (cuts < horizon)]
    breaks = np.concatenate([[sigma], cuts, [horizon]])
    # window product is constant on each (breaks[i], breaks[i+1]]
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    factors = [product_factor(prob.impulses, max(sigma, s - tau), s, -1) for s in mid]
    P = Product(Restricted(prob.p, sigma, horizon), StepFunction(breaks, factors))
    return NonimpulsiveProblem(P, prob.g, tau, sigma, phi, horizon)
