"""The impulsive measure delay problem and its impulse products.

    y(s2) - y(s1) = -int_{s1}^{s2} p(t) y(t - tau) dg(t) + sum of impulses,
    y(t_k+) = (1 + b_k) y(t_k),

with history ``phi`` on ``[t0 - tau, t0]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .regulated import Product, RegulatedFn, StepFunction
from .stieltjes import DEFAULT_TOL, Integrator, integrate

__all__ = [
    "ImpulseSchedule", "ImpulseGenerator", "MeasureDDEProblem", "Violation",
    "ScheduleError", "validate", "product_factor", "P_of", "P_view",
]

UNROLL_LIMIT = 1_000_000


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class ImpulseGenerator:
    """Arithmetic run of impulse points ``first + k * period`` with constant b."""
    first: float
    period: float
    b: float
    count: int | None = None  # None: unbounded

    def points_upto(self, hi, limit=UNROLL_LIMIT):
        if self.period <= 0:
            raise ScheduleError("generator period must be positive")
        if hi <= self.first:
            return np.zeros(0)
        n = math.ceil((hi - self.first) / self.period) + 1
        if self.count is not None:
            n = min(n, self.count)
        if n > limit:
            raise ScheduleError(
                f"horizon {hi} needs {n} generated impulses, beyond the unroll limit {limit}")
        pts = self.first + self.period * np.arange(n)
        return pts[pts < hi]


@dataclass(frozen=True)
class ImpulseSchedule:
    """Impulse times ``t_k`` with magnitudes ``b_k``.

    An explicit list plus an optional generator unrolled lazily on demand.
    """

    points: tuple = ()
    magnitudes: tuple = ()
    generator: ImpulseGenerator | None = None
    unroll_limit: int = UNROLL_LIMIT

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(x) for x in self.points))
        object.__setattr__(self, "magnitudes", tuple(float(x) for x in self.magnitudes))

    def upto(self, hi):
        """All ``(t_k, b_k)`` with ``t_k < hi``, sorted."""
        pts = np.asarray(self.points)
        bs = np.asarray(self.magnitudes)
        n = min(pts.size, bs.size)
        pts, bs = pts[:n], bs[:n]
        if self.generator is not None:
            gp = self.generator.points_upto(hi, self.unroll_limit)
            pts = np.concatenate([pts, gp])
            bs = np.concatenate([bs, np.full(gp.size, self.generator.b)])
        keep = pts < hi
        pts, bs = pts[keep], bs[keep]
        order = np.argsort(pts, kind="stable")
        return pts[order], bs[order]

    def between(self, lo, hi):
        """``(t_k, b_k)`` with ``lo <= t_k < hi``."""
        pts, bs = self.upto(hi)
        keep = pts >= lo
        return pts[keep], bs[keep]

    def product_factor(self, lo, hi, exponent=1):
        return product_factor(self, lo, hi, exponent)

    @property
    def is_empty(self):
        return not self.points and self.generator is None

    def violations(self, horizon):
        out = []
        if len(self.points) != len(self.magnitudes):
            out.append(Violation("impulses", "points and magnitudes must have equal length"))
        pts = list(self.points)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            out.append(Violation("impulses.points", "t_k must be strictly increasing"))
        if any(b == -1.0 for b in self.magnitudes):
            out.append(Violation("impulses.b", "b_k = -1 forbidden"))
        gen = self.generator
        if gen is not None:
            if gen.period <= 0:
                out.append(Violation("impulses.generator.period", "period must be positive"))
            if gen.b == -1.0:
                out.append(Violation("impulses.generator.b", "b_k = -1 forbidden"))
            if gen.period > 0 and not out:
                try:
                    all_pts, _ = self.upto(horizon)
                except ScheduleError as exc:
                    out.append(Violation("impulses.generator", str(exc)))
                else:
                    if np.any(np.diff(all_pts) <= 0):
                        out.append(Violation("impulses", "explicit and generated points collide"))
        return out

    def to_dict(self):
        d = {"points": list(self.points), "b": list(self.magnitudes)}
        if self.generator is not None:
            g = self.generator
            d["generator"] = {"first": g.first, "period": g.period, "b": g.b, "count": g.count}
        return d


def product_factor(sched: ImpulseSchedule, lo: float, hi: float, exponent: int = 1) -> float:
    """Product of ``(1 + b_k)**exponent`` over ``lo <= t_k < hi``; 1 if empty."""
    if lo > hi:
        raise ValueError(f"invalid window [{lo}, {hi})")
    _, bs = sched.between(lo, hi)
    out = 1.0
    for b in bs:
        out *= (1.0 + b) ** exponent
    return out


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self):
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class MeasureDDEProblem:
    p: RegulatedFn
    g: Integrator
    tau: float
    t0: float
    phi: RegulatedFn
    impulses: ImpulseSchedule = field(default_factory=ImpulseSchedule)

    def P_of(self, t):
        return P_of(self, t)

    def P_view(self, lo, hi, exponent=1):
        return P_view(self, lo, hi, exponent)


def _probe_windows(prob, horizon, count=8):
    span = horizon - prob.t0
    edges = prob.t0 + span * np.arange(count + 1) / count
    return list(zip(edges[:-1], edges[1:]))


def validate(prob: MeasureDDEProblem, horizon: float | None = None) -> list:
    """Return the list of violated rules; empty when the problem is valid."""
    out = []
    tau, t0 = prob.tau, prob.t0
    if not (isinstance(tau, (int, float)) and math.isfinite(tau) and tau > 0):
        out.append(Violation("tau", "tau must be positive"))
        tau = None
    if horizon is None:
        horizon = t0 + 10 * (tau or 1.0)
        if math.isfinite(prob.p.domain_end):
            horizon = min(horizon, prob.p.domain_end)
    if not horizon > t0:
        out.append(Violation("horizon", "horizon must exceed t0"))
        return out
    if tau is not None:
        start, end = prob.phi.domain_start, prob.phi.domain_end
        scale = 1e-12 * max(1.0, abs(t0), tau)
        if abs(start - (t0 - tau)) > scale or abs(end - t0) > scale:
            out.append(Violation("phi", f"history domain must be [t0 - tau, t0] = [{t0 - tau}, {t0}]"))
    if prob.p.domain_start > t0 or prob.p.domain_end < horizon:
        out.append(Violation("p", f"p must be defined on [t0, horizon] = [{t0}, {horizon}]"))
    dens = prob.g.density
    if dens is not None and (dens.domain_start > t0 or dens.domain_end < horizon):
        out.append(Violation("g.density", f"density must be defined on [{t0}, {horizon}]"))

    sched_viol = prob.impulses.violations(horizon)
    out.extend(sched_viol)
    if not sched_viol:
        pts, _ = prob.impulses.upto(horizon)
        if np.any(pts <= t0):
            out.append(Violation("impulses.points", "impulse points must lie in (t0, inf)"))
        jp = prob.g.jump_points
        if jp.size and np.isin(pts, jp).any():
            out.append(Violation("g.jumps", "g must be continuous at every impulse point"))

    if not out:
        for a, b in _probe_windows(prob, horizon):
            try:
                r = integrate(prob.p, prob.g, a, b, DEFAULT_TOL)
            except (ValueError, ArithmeticError) as exc:
                out.append(Violation("p", f"int p dg failed on [{a}, {b}]: {exc}"))
                break
            if not (r.converged and math.isfinite(r.value)):
                out.append(Violation("p", f"int p dg does not exist numerically on [{a}, {b}]"))
                break
    return out


def P_of(prob: MeasureDDEProblem, t: float, exponent: int = 1) -> float:
    """Auxiliary coefficient ``prod_{t - tau <= t_k < t} (1 + b_k) * p(t)``.

    ``exponent=-1`` gives the inverse-product coefficient.
    """
    return product_factor(prob.impulses, t - prob.tau, t, exponent) * prob.p.value_at(t)


def P_view(prob: MeasureDDEProblem, lo: float, hi: float, exponent: int = 1) -> RegulatedFn:
    """``P`` on ``[lo, hi]`` as a regulated function.

    Breakpoints are those of ``p`` plus every ``t_k`` and ``t_k + tau`` in
    range, where the window product changes.
    """
    if not math.isfinite(hi):
        raise ValueError("P_view needs a finite upper end")
    tau = prob.tau
    pts, _ = prob.impulses.between(lo - tau, hi)
    cuts = np.unique(np.concatenate([pts, pts + tau]))
    cuts = cuts[(cuts > lo) & (cuts < hi)]
    breaks = np.concatenate([[lo], cuts, [hi]])
    # the window [s - tau, s) is constant for s in (breaks[i], breaks[i+1]];
    # sample it at the midpoint, away from roundoff at t_k + tau
    mid = 0.5 * (breaks[:-1] + breaks[1:])
    factors = [product_factor(prob.impulses, s - tau, s, exponent) for s in mid]
    step = StepFunction(breaks, factors)
    return Product(prob.p, step)
