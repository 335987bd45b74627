"""Method-of-steps solver for the impulsive measure delay equation.

On each delay step ``[t0 + n tau, t0 + (n+1) tau]`` the delayed argument
``y(s - tau)`` is already known (the history ``phi`` for the first step, the
previous step's piecewise-linear samples afterwards), so

    y(t) = y(s+) - int_s^t p(r) y(r - tau) dg(r)

between consecutive grid nodes, with ``y(t_k+) = (1 + b_k) y(t_k)`` applied at
every impulse node.  An impulse on a step boundary is applied before the
next step starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .problem import MeasureDDEProblem, Violation, validate
from .regulated import Joined, PiecewiseLinear, Product, Restricted, Shifted
from .stieltjes import DEFAULT_TOL, integrate_partition

__all__ = ["Trajectory", "ProblemError", "QuadratureFailure", "solve", "residual",
           "DEFAULT_SAMPLES"]

DEFAULT_SAMPLES = 512


class ProblemError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class QuadratureFailure(ArithmeticError):
    def __init__(self, where):
        self.where = where
        super().__init__(f"quadrature did not converge on [{where[0]}, {where[1]}]")


@dataclass
class Trajectory:
    """Sampled solution.

    ``y`` holds the left value at each grid time; ``post_jump`` maps every
    grid time where ``y`` jumps (impulses, jumps of ``g`` or of the history)
    to the right limit there.
    """

    t: np.ndarray
    y: np.ndarray
    post_jump: dict
    t0: float
    tau: float
    info: dict = field(default_factory=dict)
    impulse_times: tuple = ()

    @property
    def horizon(self):
        return float(self.t[-1])

    @property
    def is_impulse(self):
        return np.isin(self.t, np.asarray(self.impulse_times, dtype=float))

    def right_values(self):
        right = self.y.copy()
        if self.post_jump:
            idx = np.searchsorted(self.t, list(self.post_jump))
            right[idx] = list(self.post_jump.values())
        return right

    def as_function(self):
        """Left-continuous piecewise-linear interpolant of the samples."""
        return PiecewiseLinear(self.t, self.y, self.right_values())

    def value_at(self, s):
        return self.as_function().value_at(s)

    def copy(self):
        return Trajectory(self.t.copy(), self.y.copy(), dict(self.post_jump),
                          self.t0, self.tau, dict(self.info), tuple(self.impulse_times))


def _merge_nodes(a, b, uniform, specials, snap):
    """Sorted nodes in [a, b]: specials kept exactly, uniform nodes within
    ``snap`` of a special or of an end dropped."""
    specials = np.unique(specials[(specials > a + snap) & (specials < b - snap)])
    uniform = uniform[(uniform > a + snap) & (uniform < b - snap)]
    if specials.size and uniform.size:
        pos = np.clip(np.searchsorted(specials, uniform), 1, specials.size)
        near = np.minimum(np.abs(uniform - specials[pos - 1]),
                          np.abs(specials[np.minimum(pos, specials.size - 1)] - uniform))
        uniform = uniform[near > snap]
    return np.concatenate([[a], np.sort(np.concatenate([uniform, specials])), [b]])


def _interp_bound(x, left, right):
    """Crude bound of the linear interpolation error: h * |slope change| / 8."""
    if x.size < 3:
        return 0.0
    h = np.diff(x)
    slope = (left[1:] - right[:-1]) / h
    kink = np.abs(np.diff(slope)) * np.minimum(h[1:], h[:-1]) / 8.0
    return float(np.max(kink)) if kink.size else 0.0


def solve(prob: MeasureDDEProblem, horizon: float,
          samples_per_step: int = DEFAULT_SAMPLES, tol: float = DEFAULT_TOL,
          check: bool = True) -> Trajectory:
    """Solve on ``[t0 - tau, horizon]`` by the method of steps."""
    if check:
        problems = validate(prob, horizon)
        if problems:
            raise ProblemError(problems)
    elif not horizon > prob.t0:
        raise ProblemError([Violation("horizon", "horizon must exceed t0")])
    if samples_per_step < 1:
        raise ValueError("samples_per_step must be positive")
    tau, t0 = float(prob.tau), float(prob.t0)
    n_samp = int(samples_per_step)
    offsets = tau * np.arange(n_samp + 1) / n_samp
    snap = 1e-9 * tau / n_samp

    imp_t, imp_b = prob.impulses.between(t0, np.nextafter(horizon, math.inf))
    imp_t = imp_t[imp_t > t0]
    imp_b = imp_b[-imp_t.size:] if imp_t.size else imp_b[:0]
    static = [imp_t, np.asarray(prob.p.breakpoints_in(t0, horizon))]
    if prob.g.density is not None:
        static.append(np.asarray(prob.g.density.breakpoints_in(t0, horizon)))
    if prob.g.jumps:
        jp = prob.g.jump_points
        static.append(jp[(jp > t0) & (jp < horizon)])
    static = np.unique(np.concatenate(static))

    # history samples
    phi = Restricted(prob.phi, t0 - tau, t0)
    hist_special = np.asarray(phi.interior_breaks)
    h_nodes = _merge_nodes(t0 - tau, t0, t0 - tau + offsets, hist_special, snap)
    h_left = phi(h_nodes)
    post_jump = {float(s): r for s, r in phi.jump_points}

    grid = [h_nodes]
    left_vals = [h_left]
    impulse_times = []
    quad_err = 0.0
    interp = 0.0
    panels = 0

    prev_fn = phi
    carried = hist_special + tau
    y_right = float(h_left[-1])  # no impulse at t0
    n = 0
    a = t0
    while a < horizon:
        b = min(t0 + (n + 1) * tau, horizon)
        if b - a <= snap:
            break
        specials = np.concatenate([static, carried])
        nodes = _merge_nodes(a, b, a + offsets, specials, snap)
        delayed = Restricted(Shifted(prev_fn, tau), a, b)
        integrand = Product(Restricted(prob.p, a, b), delayed)
        res = integrate_partition(integrand, prob.g, nodes, tol)
        if not res.converged:
            raise QuadratureFailure((a, b))
        quad_err += float(np.sum(res.errors))
        panels += res.panels_used

        # impulses on this step's nodes (exclude a, handled by the previous step)
        hit = (imp_t > a + snap) & (imp_t <= b + snap)
        where = {}
        for tk, bk in zip(imp_t[hit], imp_b[hit]):
            i = int(np.argmin(np.abs(nodes - tk)))
            where[i] = bk

        # a jump of g at s moves y at s itself: y(s+) = y(s) - p(s) y(s - tau) dg
        gjump = np.zeros(nodes.size)
        if prob.g.jumps:
            jp, jd = prob.g.jump_points, prob.g.jump_sizes
            m = (jp >= a) & (jp < b)
            if m.any():
                idx = np.searchsorted(nodes, jp[m], side="right") - 1
                np.add.at(gjump, idx, integrand(jp[m]) * jd[m])

        yl = np.empty(nodes.size)
        yr = np.empty(nodes.size)
        yl[0] = left_vals[-1][-1]
        yr[0] = y_right - gjump[0]
        if gjump[0]:
            post_jump[float(a)] = yr[0]
        for i in range(nodes.size - 1):
            v = yr[i] - (res.values[i] - gjump[i])
            yl[i + 1] = v
            bk = where.get(i + 1)
            w = v if bk is None else (1.0 + bk) * v
            if bk is not None:
                impulse_times.append(float(nodes[i + 1]))
            if i + 1 < nodes.size - 1:
                w -= gjump[i + 1]
            yr[i + 1] = w
            if w != v:
                post_jump[float(nodes[i + 1])] = w
        interp = max(interp, _interp_bound(nodes, yl, yr))

        grid.append(nodes[1:])
        left_vals.append(yl[1:])
        prev_fn = PiecewiseLinear(nodes, yl, yr)
        inside = nodes[1:-1]
        carried = inside[np.isin(inside, specials)] + tau
        carried = carried[carried < horizon]
        y_right = float(yr[-1])
        a = b
        n += 1

    t = np.concatenate(grid)
    y = np.concatenate(left_vals)
    info = {
        "samples_per_step": n_samp,
        "quad_tol": tol,
        "quad_error": quad_err,
        "interp_bound": interp,
        "tolerance": max(quad_err, interp),
        "panels": panels,
        "steps": n,
    }
    return Trajectory(t, y, post_jump, t0, tau, info, tuple(impulse_times))


def _cumulative_defect(prob, traj, points, tol):
    """``R(s) = y(s) - y(t0) + int_{t0}^s p y(.-tau) dg - sum_{t0<=t_k<s} b_k y(t_k)``
    at the sorted ``points`` (all >= t0)."""
    tau, t0 = traj.tau, traj.t0
    y_fn = traj.as_function()
    end = traj.horizon
    hist = Restricted(prob.phi, t0 - tau, t0)
    past = Joined(hist, Restricted(y_fn, t0, end))
    integrand = Product(Restricted(prob.p, t0, end), Restricted(Shifted(past, tau), t0, end))
    edges = np.concatenate([[t0], points])
    res = integrate_partition(integrand, prob.g, edges, tol)
    integral = np.cumsum(res.values)
    imp_t, imp_b = prob.impulses.between(t0, np.nextafter(end, math.inf))
    if imp_t.size:
        jumps = imp_b * y_fn(imp_t)
        csum = np.concatenate([[0.0], np.cumsum(jumps)])
        jump_sum = csum[np.searchsorted(imp_t, points, side="left")]
    else:
        jump_sum = np.zeros(points.size)
    return y_fn(points) - y_fn.value_at(t0) + integral - jump_sum


def residual(prob: MeasureDDEProblem, traj: Trajectory, probes: int = 100,
             seed: int = 0, tol: float = DEFAULT_TOL) -> float:
    """Largest defect of the integral equation over probe pairs ``(s1, s2)``.

    Every pair of grid nodes is covered exactly (via the extremes of the
    cumulative defect at the nodes); ``probes`` further random pairs test
    the piecewise-linear interpolant between nodes.
    """
    t0, end = traj.t0, traj.horizon
    nodes = traj.t[traj.t >= t0]
    rng = np.random.default_rng(seed)
    rand = rng.uniform(t0, end, size=(probes, 2))
    pts = np.unique(np.concatenate([nodes, rand.ravel()]))
    defect = _cumulative_defect(prob, traj, pts, tol)
    node_def = defect[np.isin(pts, nodes)]
    worst = float(np.max(node_def) - np.min(node_def)) if node_def.size else 0.0
    i = np.searchsorted(pts, rand[:, 0])
    j = np.searchsorted(pts, rand[:, 1])
    if probes:
        worst = max(worst, float(np.max(np.abs(defect[j] - defect[i]))))
    return worst
