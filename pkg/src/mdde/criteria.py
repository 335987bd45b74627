"""Oscillation and nonoscillation tests on a finite horizon.

Both integral tests evaluate the window functional

    F(t) = int_{t - tau}^t prod_{s - tau <= t_k < s} (1 + b_k) p(s) dg(s)

on a grid of ``t`` and compare its supremum with a threshold: ``1`` for the
oscillation test, ``1/e`` for the nonoscillation test.  A limsup cannot be
computed, so every verdict is qualified by the horizon.

The certificate runs ``u_{k+1}(t) = P(t) exp(int_{t - tau}^t u_k)`` from
``u_1 = P``; a monotone, converged stack witnesses a positive solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .problem import MeasureDDEProblem, P_view
from .solver import Trajectory
from .stieltjes import DEFAULT_TOL, integrate_partition

__all__ = [
    "Verdict", "Classification", "CriterionReport", "Certificate", "HypothesisError",
    "oscillation_criterion", "nonoscillation_criterion", "iterate_certificate",
    "classify_trajectory", "window_values", "INV_E",
]

INV_E = math.exp(-1.0)
EXP_LIMIT = 700.0  # exp overflows a little above 709
_EPS = np.finfo(float).eps


class Verdict(str, Enum):
    SATISFIED = "SatisfiedOnHorizon"
    NOT_SATISFIED = "NotSatisfiedOnHorizon"
    BOUNDARY = "Boundary"


class Classification(str, Enum):
    POSITIVE = "EventuallyPositive"
    NEGATIVE = "EventuallyNegative"
    OSCILLATORY = "Oscillatory"
    INDETERMINATE = "Indeterminate"


class HypothesisError(ValueError):
    def __init__(self, violated):
        self.violated = list(violated)
        super().__init__("; ".join(self.violated))


LIMSUP_CAVEAT = ("supremum over the sampled horizon only; the asymptotic statement "
                 "needs the witnessed bound to persist beyond it")


@dataclass
class CriterionReport:
    kind: str
    t: np.ndarray
    F: np.ndarray
    errors: np.ndarray
    threshold: float
    verdict: Verdict
    margin: float
    T: float
    horizon: float
    stride: float
    caveat: str = LIMSUP_CAVEAT

    @property
    def window_values(self):
        return list(zip(self.t.tolist(), self.F.tolist()))

    @property
    def sup_observed(self):
        return float(np.max(self.F))

    @property
    def argsup(self):
        return float(self.t[int(np.argmax(self.F))])

    @property
    def conclusion(self):
        if self.verdict is not Verdict.SATISFIED:
            return "Inconclusive"
        return "Oscillatory" if self.kind == "oscillation" else "NonoscillatoryCertified"

    def to_dict(self):
        return {
            "kind": self.kind,
            "verdict": self.verdict.value,
            "conclusion": self.conclusion,
            "threshold": self.threshold,
            "sup_observed": self.sup_observed,
            "argsup": self.argsup,
            "margin": self.margin,
            "T": self.T,
            "horizon": self.horizon,
            "stride": self.stride,
            "caveat": self.caveat,
            "window_values": [{"t": t, "F": f, "error": e}
                              for t, f, e in zip(self.t.tolist(), self.F.tolist(),
                                                 self.errors.tolist())],
        }


def _time_grid(T, horizon, stride):
    if not stride > 0:
        raise ValueError("stride must be positive")
    if not horizon >= T:
        raise ValueError("horizon must be at least T")
    n = int(math.floor((horizon - T) / stride + 1e-9))
    t = T + stride * np.arange(n + 1)
    if horizon - t[-1] > 1e-9 * stride:
        t = np.append(t, horizon)
    else:
        t[-1] = min(t[-1], horizon)
    return t


def window_values(prob: MeasureDDEProblem, t, tol=DEFAULT_TOL):
    """``F`` at the sorted times ``t`` with per-window error bounds."""
    t = np.asarray(t, dtype=float)
    tau = prob.tau
    lo, hi = float(t[0]) - tau, float(t[-1])
    P = P_view(prob, lo, hi)
    edges = np.unique(np.concatenate([t, t - tau]))
    res = integrate_partition(P, prob.g, edges, tol)
    if not res.converged:
        raise ArithmeticError(f"quadrature did not converge on [{lo}, {hi}]")
    cum = np.concatenate([[0.0], np.cumsum(res.values)])
    cerr = np.concatenate([[0.0], np.cumsum(res.errors)])
    i_hi = np.searchsorted(edges, t)
    i_lo = np.searchsorted(edges, t - tau)
    return cum[i_hi] - cum[i_lo], cerr[i_hi] - cerr[i_lo]


def _probes(fn_list, lo, hi, count=257):
    """Points strictly inside ``(lo, hi)`` avoiding every breakpoint, so that
    a.e. conditions ignore values on null sets."""
    pts = lo + (hi - lo) * (np.arange(count) + 0.5) / count
    cuts = [lo, hi]
    for fn in fn_list:
        cuts.extend(fn.breakpoints_in(lo, hi))
    cuts = np.unique(cuts)
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    pts = np.unique(np.concatenate([pts, mids]))
    return pts[~np.isin(pts, cuts)]


def _check_window_start(prob, T):
    if T < prob.t0 + prob.tau - 1e-12 * max(1.0, abs(T)):
        raise HypothesisError([f"T must be at least t0 + tau = {prob.t0 + prob.tau}"])


def _verdict(value, threshold, margin, above):
    if above:
        if value > threshold + margin:
            return Verdict.SATISFIED
        if value < threshold - margin:
            return Verdict.NOT_SATISFIED
    else:
        if value <= threshold - margin:
            return Verdict.SATISFIED
        if value > threshold + margin:
            return Verdict.NOT_SATISFIED
    return Verdict.BOUNDARY


def _margin(errors, sup):
    return float(np.max(errors)) + 16.0 * _EPS * max(1.0, abs(sup))


def oscillation_hypotheses(prob, T, horizon):
    """Violated hypotheses of the oscillation test on ``[T - tau, horizon]``."""
    out = []
    lo = T - prob.tau
    dens = prob.g.density
    fns = [prob.p] + ([dens] if dens is not None else [])
    pts = _probes(fns, lo, horizon)
    pv = prob.p(pts)
    if dens is not None:
        dv = dens(pts)
        if np.any(dv < 0):
            out.append("g must be nondecreasing: density negative at "
                       f"t = {pts[dv < 0][0]}")
        if np.any(pv * dv <= 0):
            out.append(f"p * dg must be positive a.e.: fails at t = {pts[pv * dv <= 0][0]}")
    else:
        out.append("p * dg must be positive a.e.: g has no density")
    for s, d in prob.g.jumps:
        if lo <= s < horizon:
            if d < 0:
                out.append(f"g must be nondecreasing: jump {d} at s = {s}")
            elif prob.p.value_at(s) * d <= 0:
                out.append(f"p(s) * jump must be positive: fails at s = {s}")
    return out


def oscillation_criterion(prob: MeasureDDEProblem, T: float, horizon: float,
                          stride: float, tol: float = DEFAULT_TOL) -> CriterionReport:
    """Witness ``sup F > 1`` on ``[T, horizon]``."""
    _check_window_start(prob, T)
    bad = oscillation_hypotheses(prob, T, horizon)
    if bad:
        raise HypothesisError(bad)
    t = _time_grid(T, horizon, stride)
    F, err = window_values(prob, t, tol)
    sup = float(np.max(F))
    margin = _margin(err, sup)
    return CriterionReport("oscillation", t, F, err, 1.0,
                           _verdict(sup, 1.0, margin, above=True), margin, T, horizon, stride)


def nonoscillation_hypotheses(prob, lo, horizon):
    out = []
    if not prob.g.is_identity():
        out.append("g must be the identity g(s) = s")
    pts = _probes([prob.p], lo, horizon)
    pv = prob.p(pts)
    if np.any(pv <= 0):
        out.append(f"p must be positive a.e.: fails at t = {pts[pv <= 0][0]}")
    _, bs = prob.impulses.upto(horizon)
    if np.any(bs <= -1):
        out.append("every b_k must exceed -1")
    return out


def nonoscillation_criterion(prob: MeasureDDEProblem, T: float, horizon: float,
                             stride: float, tol: float = DEFAULT_TOL) -> CriterionReport:
    """Witness ``sup F <= 1/e`` on ``[T, horizon]``."""
    _check_window_start(prob, T)
    bad = nonoscillation_hypotheses(prob, T - prob.tau, horizon)
    if bad:
        raise HypothesisError(bad)
    t = _time_grid(T, horizon, stride)
    F, err = window_values(prob, t, tol)
    sup = float(np.max(F))
    margin = _margin(err, sup)
    return CriterionReport("nonoscillation", t, F, err, INV_E,
                           _verdict(sup, INV_E, margin, above=False), margin, T, horizon, stride)


@dataclass
class Certificate:
    """Fixed-point iterates on a uniform master grid.

    ``iterates[k]`` samples ``u_{k+1}`` on ``grid[starts[k]:]``.
    """

    grid: np.ndarray
    iterates: list
    starts: list
    status: str  # converged | diverged | exhausted | max_iterations
    sup_gap: float
    residual: float
    tol: float
    monotone: bool
    below_eP: bool
    gaps: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def iterations(self):
        return len(self.iterates)

    @property
    def valid_from(self):
        return float(self.grid[self.starts[-1]])

    @property
    def horizon(self):
        return float(self.grid[-1])

    def limit(self):
        """Last iterate as ``(t, u)``."""
        return self.grid[self.starts[-1]:], self.iterates[-1]

    def to_dict(self, include_iterates=True):
        d = {
            "status": self.status,
            "converged": self.converged,
            "iterations": self.iterations,
            "sup_gap": self.sup_gap,
            "residual": self.residual,
            "tol": self.tol,
            "monotone": self.monotone,
            "below_eP": self.below_eP,
            "valid_from": self.valid_from,
            "horizon": self.horizon,
            "gaps": list(self.gaps),
        }
        if include_iterates:
            d["grid"] = {"start": float(self.grid[0]), "step": float(self.grid[1] - self.grid[0]),
                         "count": int(self.grid.size)}
            d["iterates"] = [{"start_index": int(s), "values": u.tolist()}
                             for s, u in zip(self.starts, self.iterates)]
        return d


def iterate_certificate(prob: MeasureDDEProblem, T: float, horizon: float,
                        kmax: int = 50, tol: float = 1e-10,
                        cells_per_delay: int = 512) -> Certificate:
    """Run the monotone iteration on ``[T, horizon]`` with spacing
    ``tau / cells_per_delay``.

    ``u_k = P * E_k`` with ``E_1 = 1`` and ``E_{k+1}(t) = exp(int_{t-tau}^t P E_k)``.
    Window integrals use exact cell integrals of ``P`` times the trapezoid
    mean of the smooth factor ``E_k``, so jumps of ``P`` inside a cell cost
    nothing beyond ``O(h^2)``.
    """
    tau = prob.tau
    bad = nonoscillation_hypotheses(prob, T, horizon)
    if bad:
        raise HypothesisError(bad)
    if kmax < 1:
        raise ValueError("kmax must be positive")
    m = int(cells_per_delay)
    h = tau / m
    n = int(math.floor((horizon - T) / h + 1e-9))
    if n < m:
        raise ValueError("horizon - T must be at least tau")
    grid = T + h * np.arange(n + 1)
    P = P_view(prob, T, float(grid[-1]))
    cell = integrate_partition(P, prob.g, grid, DEFAULT_TOL)
    if not cell.converged:
        raise ArithmeticError("quadrature of P did not converge")
    Pint = cell.values
    Pnode = P(grid)

    def step(E, start):
        # window integrals for nodes start + m .. n using E on nodes start ..
        w = Pint[start:] * 0.5 * (E[:-1] + E[1:])
        c = np.concatenate([[0.0], np.cumsum(w)])
        return c[m:] - c[:-m]

    E = np.ones(n + 1)
    iterates = [Pnode.copy()]
    starts = [0]
    gaps = []
    monotone = True
    status = "max_iterations"
    sup_gap = math.inf
    residual = math.inf
    for _ in range(kmax):
        start = starts[-1]
        if n - start < m:
            status = "exhausted"
            break
        W = step(E, start)
        if not np.all(np.isfinite(W)) or np.max(W) > EXP_LIMIT:
            status = "diverged"
            break
        E_next = np.exp(W)
        s_next = start + m
        u_next = Pnode[s_next:] * E_next
        u_prev = iterates[-1][m:]
        diff = u_next - u_prev
        if np.any(diff < -1e-12 * np.maximum(1.0, np.abs(u_next))):
            monotone = False
        sup_gap = float(np.max(np.abs(diff)))
        gaps.append(sup_gap)
        iterates.append(u_next)
        starts.append(s_next)
        E = E_next
        if sup_gap <= tol:
            status = "converged"
            break
    if status == "max_iterations" and sup_gap <= tol:
        status = "converged"
    if status == "converged":
        # one more application measures the fixed-point defect
        start = starts[-1]
        if n - start >= m:
            W = step(E, start)
            residual = float(np.max(np.abs(Pnode[start + m:] * np.exp(W) - iterates[-1][m:])))
        else:
            residual = sup_gap
    below = all(np.all(u <= math.e * Pnode[s] * (1 + 1e-12) + 1e-300)
                for s, u in zip(starts, iterates))
    return Certificate(grid, iterates, starts, status, sup_gap, residual, tol,
                       monotone, below, gaps)


def classify_trajectory(traj: Trajectory, tail_fraction: float = 0.25,
                        zero_tol: float | None = None) -> Classification:
    """Sign pattern of the last ``tail_fraction`` of the samples.

    Right limits at jump points count as samples.  Samples of both signs
    beyond ``zero_tol`` mean oscillation.  Otherwise near-zero samples are
    ignored when isolated (a null set); a run of them is indeterminate.
    """
    if not 0 < tail_fraction < 1:
        raise ValueError("tail_fraction must lie in (0, 1)")
    n = traj.t.size
    k = max(1, int(math.ceil(tail_fraction * n)))
    t_tail = traj.t[n - k:]
    vals = [traj.y[n - k:]]
    post = [v for s, v in traj.post_jump.items() if s >= t_tail[0]]
    if post:
        vals.append(np.asarray(post, dtype=float))
    v = np.concatenate(vals)
    scale = float(np.max(np.abs(v)))
    if zero_tol is None:
        zero_tol = 1e-9 * scale
    if not scale > zero_tol or not np.all(np.isfinite(v)):
        return Classification.INDETERMINATE
    big = v[np.abs(v) > zero_tol]
    if np.any(big > 0) and np.any(big < 0):
        return Classification.OSCILLATORY
    small = np.abs(traj.y[n - k:]) <= zero_tol
    if np.any(small[1:] & small[:-1]):
        return Classification.INDETERMINATE
    return Classification.POSITIVE if big[0] > 0 else Classification.NEGATIVE
