"""Kurzweil-Stieltjes integrals for piecewise-smooth integrands.

The integrator ``g`` is decomposed into a density (its derivative on
segment interiors) and a finite list of jumps.  For left-continuous ``g``
a jump at ``s`` carries ``g(s+) - g(s)`` and belongs to ``[a, b]`` iff
``a <= s < b``, so

    int_a^b f dg = sum_panels int f(s) g'(s) ds + sum_{a <= s_j < b} f(s_j) D_j.

Panels are split at every breakpoint of ``f`` and of the density and each is
integrated by a vectorised adaptive 21-point Gauss-Kronrod rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .regulated import Constant, RegulatedFn

__all__ = [
    "Integrator", "QuadResult", "PartitionResult",
    "integrate", "integrate_dt", "integrate_partition", "alexiewicz_norm",
    "DEFAULT_TOL", "PANEL_BUDGET",
]

DEFAULT_TOL = 1e-10
PANEL_BUDGET = 10_000

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny

# QUADPACK qk21 abscissae and weights (non-negative half, outermost first)
_XGK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0])
_WGK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208980088000, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338])

_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_KW = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]


@dataclass(frozen=True)
class Integrator:
    """``g = base_value + int density + sum of jumps``, left-continuous.

    ``density=None`` means a pure-jump integrator.
    """

    density: RegulatedFn | None = None
    jumps: tuple = ()
    base_point: float = 0.0
    base_value: float = 0.0
    _identity: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        jumps = tuple((float(s), float(d)) for s, d in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        pts = [s for s, _ in jumps]
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("jump points must be strictly increasing")
        if any(d == 0 for _, d in jumps):
            raise ValueError("jump sizes must be nonzero")

    @classmethod
    def identity(cls):
        return cls(density=Constant(1.0), _identity=True)

    def is_identity(self, probes=None):
        if self._identity:
            return True
        if self.jumps or self.density is None:
            return False
        d = self.density
        if probes is None:
            probes = d.sample_grid()
        probes = probes[(probes >= d.domain_start) & (probes <= d.domain_end)]
        return bool(np.all(d(probes) == 1.0))

    @property
    def jump_points(self):
        return np.array([s for s, _ in self.jumps])

    @property
    def jump_sizes(self):
        return np.array([d for _, d in self.jumps])

    def jumps_in(self, a, b):
        """Jumps with ``a <= s < b``."""
        return [(s, d) for s, d in self.jumps if a <= s < b]

    def value(self, t, tol=DEFAULT_TOL):
        """Reconstruct g(t) from the anchor, the density and the jumps."""
        one = Constant(1.0)
        t0 = self.base_point
        if t >= t0:
            return self.base_value + integrate(one, self, t0, t, tol).value
        return self.base_value - integrate(one, self, t, t0, tol).value

    def to_dict(self):
        return {
            "identity": self._identity,
            "density": None if self.density is None else self.density.to_dict(),
            "jumps": [list(j) for j in self.jumps],
            "base_point": self.base_point,
            "base_value": self.base_value,
        }


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    panels_used: int
    converged: bool = True

    def to_dict(self):
        return {"value": self.value, "error_estimate": self.error_estimate,
                "panels_used": self.panels_used, "converged": self.converged}


@dataclass(frozen=True)
class PartitionResult:
    """Per-interval integrals over consecutive edges."""
    values: np.ndarray
    errors: np.ndarray
    panels_used: int
    converged: bool


def _gk21(func, a, b):
    """Vectorised Gauss-Kronrod over panels ``[a_i, b_i]``.

    Returns (kronrod value, error estimate, int |f|) per panel, with the
    QUADPACK error heuristic including its roundoff floor.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = func(x, np.broadcast_to(mid[:, None], x.shape))
    resk = fx @ _KW
    resg = fx @ _GW
    resabs = np.abs(fx) @ _KW
    resasc = np.abs(fx - 0.5 * resk[:, None]) @ _KW
    ahalf = np.abs(half)
    err = np.abs((resk - resg) * half)
    resasc = resasc * ahalf
    resabs = resabs * ahalf
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0) & (err != 0), scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > _TINY / (50.0 * _EPS), np.maximum(floor, err), err)
    val = resk * half
    bad = ~np.isfinite(val) | ~np.isfinite(err)
    err = np.where(bad, np.inf, err)
    return val, err, resabs


def _adaptive(func, lo, hi, tol, limit):
    """Globally adaptive bisection of the panels ``[lo_i, hi_i]``.

    Each round splits the largest-error panels until the summed estimate is
    below ``tol`` or every panel sits at its roundoff floor.  Results are
    summed per initial panel in a fixed order, so output is deterministic.
    """
    m = lo.size
    if m == 0:
        return np.zeros(0), np.zeros(0), 0, True
    a, b = lo.astype(float), hi.astype(float)
    owner = np.arange(m)
    val, err, resabs = _gk21(func, a, b)
    used = m
    converged = True
    while True:
        floor = 50.0 * _EPS * resabs * (1 + 1e-12)
        total = float(np.sum(err))
        scale = np.maximum(np.abs(a), np.abs(b))
        tiny = (b - a) <= 64.0 * _EPS * scale + 1e-300
        splittable = (err > floor) & ~tiny
        if total <= tol or not splittable.any():
            if total > tol and np.any((err > floor) & tiny):
                converged = False
            break
        idx = np.flatnonzero(splittable)
        idx = idx[np.argsort(-err[idx], kind="stable")]
        remaining = total - np.cumsum(err[idx])
        k = int(np.searchsorted(-remaining, -0.5 * tol)) + 1
        chosen = np.sort(idx[:min(k, idx.size)])
        if used + 2 * chosen.size > limit:
            converged = False
            break
        ca, cb = a[chosen], b[chosen]
        c = 0.5 * (ca + cb)
        na, nb = np.concatenate([ca, c]), np.concatenate([c, cb])
        nval, nerr, nabs = _gk21(func, na, nb)
        used += na.size
        keep = np.ones(a.size, dtype=bool)
        keep[chosen] = False
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        owner = np.concatenate([owner[keep], owner[chosen], owner[chosen]])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        resabs = np.concatenate([resabs[keep], nabs])
    order = np.lexsort((a, owner))
    total_v = np.zeros(m)
    total_e = np.zeros(m)
    np.add.at(total_v, owner[order], val[order])
    np.add.at(total_e, owner[order], err[order])
    return total_v, total_e, used, converged


def _check_interval(fn, a, b, what):
    if fn is None:
        return
    if a < fn.domain_start or b > fn.domain_end:
        raise ValueError(
            f"[{a}, {b}] not inside the domain [{fn.domain_start}, {fn.domain_end}] of {what}")


def integrate_partition(f: RegulatedFn, g: Integrator, edges, tol=DEFAULT_TOL,
                        limit=PANEL_BUDGET) -> PartitionResult:
    """Integrals of ``f dg`` over each ``[edges[i], edges[i+1]]``.

    ``tol`` bounds the summed error over the whole range.  Jumps of ``g`` at
    ``s`` are credited to the interval with ``edges[i] <= s < edges[i+1]``.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two edges")
    if np.any(np.diff(edges) < 0):
        raise ValueError("edges must be nondecreasing")
    if not tol > 0:
        raise ValueError("tol must be positive")
    a, b = float(edges[0]), float(edges[-1])
    n = edges.size - 1
    values = np.zeros(n)
    errors = np.zeros(n)
    if a == b:
        return PartitionResult(values, errors, 0, True)
    _check_interval(f, a, b, "the integrand")
    density = g.density
    used, converged = 0, True
    if density is not None:
        _check_interval(density, a, b, "the integrator density")
        cuts = np.asarray(f.breakpoints_in(a, b) + density.breakpoints_in(a, b))
        cuts = np.unique(cuts)
        # drop cuts that coincide with an edge up to roundoff
        nearest = np.clip(np.searchsorted(edges, cuts), 1, n)
        gap = np.minimum(np.abs(cuts - edges[nearest - 1]), np.abs(edges[nearest] - cuts))
        cuts = cuts[gap > 64.0 * _EPS * np.maximum(1.0, np.abs(cuts))]
        pts = np.sort(np.concatenate([edges, cuts]))
        lo, hi = pts[:-1], pts[1:]
        pid = np.clip(np.searchsorted(edges, 0.5 * (lo + hi), side="right") - 1, 0, n - 1)
        nonempty = hi > lo
        lo, hi, pid = lo[nonempty], hi[nonempty], pid[nonempty]

        if isinstance(density, Constant) and density.value == 1.0:
            def func(x, anchor):
                return f.branch(x, anchor)
        else:
            def func(x, anchor):
                return f.branch(x, anchor) * density.branch(x, anchor)

        vals, errs, used, converged = _adaptive(func, lo, hi, tol, limit)
        np.add.at(values, pid, vals)
        np.add.at(errors, pid, errs)
    if g.jumps:
        s = g.jump_points
        inside = (s >= a) & (s < b)
        if inside.any():
            s_in = s[inside]
            d_in = g.jump_sizes[inside]
            idx = np.searchsorted(edges, s_in, side="right") - 1
            np.add.at(values, idx, f(s_in) * d_in)
    return PartitionResult(values, errors, used, converged)


def integrate(f: RegulatedFn, g: Integrator, a: float, b: float,
              tol: float = DEFAULT_TOL, limit: int = PANEL_BUDGET) -> QuadResult:
    """``int_a^b f dg`` with an error estimate.

    If the panel budget runs out the best value is returned with
    ``converged=False``.
    """
    if a > b:
        raise ValueError(f"invalid interval [{a}, {b}]")
    res = integrate_partition(f, g, [a, b], tol, limit)
    return QuadResult(float(res.values[0]), float(res.errors[0]),
                      max(res.panels_used, 1), res.converged)


_IDENTITY = Integrator.identity()


def integrate_dt(f: RegulatedFn, a: float, b: float, tol: float = DEFAULT_TOL,
                 limit: int = PANEL_BUDGET) -> QuadResult:
    """Perron integral ``int_a^b f(s) ds``."""
    return integrate(f, _IDENTITY, a, b, tol, limit)


def alexiewicz_norm(f: RegulatedFn, a: float, b: float, grid: int = 1025,
                    tol: float = DEFAULT_TOL) -> float:
    """``max_t |int_a^t f|`` over ``grid`` equally spaced ``t`` in [a, b].

    A lower bound for the supremum; it converges as ``grid`` grows.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2")
    edges = np.linspace(a, b, grid)
    res = integrate_partition(f, _IDENTITY, edges, tol)
    if not res.converged:
        raise ArithmeticError("quadrature did not converge")
    return float(np.max(np.abs(np.concatenate([[0.0], np.cumsum(res.values)]))))

