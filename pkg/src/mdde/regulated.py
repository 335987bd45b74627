"""Left-continuous regulated functions with finitely many breakpoints.

A function is stored as ordered breakpoints ``a_0 < a_1 < ... < a_n`` and one
body per segment.  Segment ``i`` governs the half-open interval
``(a_i, a_{i+1}]``; the value at the domain start ``a_0`` comes from the first
body.  With this layout every function is left-continuous by construction,
and the right limit at a breakpoint ``a_i`` is the next body's value there.

All classes share the evaluation protocol used by the quadrature code:
``branch(t, anchor)`` evaluates, at the points ``t``, the segment body that
contains ``anchor``.  Quadrature passes panel midpoints as anchors so that
nodes rounding onto a breakpoint never pick up the neighbouring body.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from . import expr as _expr

__all__ = [
    "RegulatedFn", "RegulatedFnError", "Piecewise", "PiecewiseLinear",
    "StepFunction", "Constant", "Product", "Shifted", "Joined", "Restricted",
    "from_expr", "constant",
]


class RegulatedFnError(ValueError):
    pass


def _as_body(body, side="left"):
    if isinstance(body, str):
        body = _expr.parse(body)
    if isinstance(body, _expr.Expr):
        return _expr.compile_expr(body, side)
    if callable(body):
        return lambda t: np.broadcast_to(np.asarray(body(t), dtype=float), t.shape)
    value = float(body)
    return lambda t: np.full(t.shape, value)


class RegulatedFn:
    """Base class; subclasses implement ``_body(t, seg)``."""

    def __init__(self, breaks):
        breaks = np.asarray(breaks, dtype=float)
        if breaks.ndim != 1 or breaks.size < 2:
            raise RegulatedFnError("need at least one segment")
        if np.isnan(breaks).any():
            raise RegulatedFnError("breakpoints must not be NaN")
        if not np.all(np.diff(breaks) > 0):
            raise RegulatedFnError("breakpoints must be strictly increasing")
        self.breaks = breaks

    # -- subclass hook

    def _body(self, t, seg):
        raise NotImplementedError

    def _body_right(self, t, seg):
        """Body of ``seg`` as a right limit at its left end ``t``; differs
        from ``_body`` only for bodies with their own discontinuities."""
        return self._body(t, seg)

    # -- geometry

    @property
    def domain_start(self):
        return float(self.breaks[0])

    @property
    def domain_end(self):
        return float(self.breaks[-1])

    @property
    def n_segments(self):
        return self.breaks.size - 1

    @property
    def interior_breaks(self):
        return self.breaks[1:-1]

    def _segment_left(self, t):
        # segment i owns (a_i, a_{i+1}]; the domain start belongs to segment 0
        idx = np.searchsorted(self.breaks, t, side="left") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def _segment_right(self, t):
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def _check_domain(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.breaks[0]) or np.any(t > self.breaks[-1]) or np.isnan(t).any():
            bad = t[(t < self.breaks[0]) | (t > self.breaks[-1]) | np.isnan(t)]
            raise RegulatedFnError(
                f"t={bad.flat[0]!r} outside domain [{self.domain_start}, {self.domain_end}]")
        return t

    # -- evaluation

    def branch(self, t, anchor):
        """Evaluate at ``t`` the body of the segment containing ``anchor``."""
        t = np.asarray(t, dtype=float)
        seg = self._segment_right(np.broadcast_to(anchor, t.shape))
        return self._body(t, seg)

    def __call__(self, t):
        t = self._check_domain(t)
        flat = np.atleast_1d(t)
        out = self._body(flat, self._segment_left(flat))
        return float(out[0]) if t.ndim == 0 else out.reshape(t.shape)

    def value_at(self, t):
        """f(t); by left-continuity this is also the left limit f(t-)."""
        return float(self(float(t)))

    def right_limit(self, t):
        """f(t+).  Undefined at a finite domain end."""
        t = float(t)
        self._check_domain(t)
        if t == self.breaks[-1]:
            raise RegulatedFnError(f"no right limit at the domain end {t}")
        seg = self._segment_right(np.array([t]))
        return float(self._body_right(np.array([t]), seg)[0])

    def breakpoints_in(self, a, b):
        """Interior breakpoints lying in the closed interval [a, b]."""
        if a > b:
            raise RegulatedFnError(f"invalid interval [{a}, {b}]")
        inner = self.interior_breaks
        lo = np.searchsorted(inner, a, side="left")
        hi = np.searchsorted(inner, b, side="right")
        return inner[lo:hi].tolist()

    @cached_property
    def jump_points(self):
        """List of ``(s, f(s+))`` at breakpoints where f(s+) != f(s)."""
        s = self.interior_breaks
        if s.size == 0:
            return []
        left = self._body(s, np.arange(s.size))
        right = self._body_right(s, np.arange(1, s.size + 1))
        scale = np.maximum(1.0, np.maximum(np.abs(left), np.abs(right)))
        jump = np.abs(right - left) > 1e-12 * scale
        return [(float(a), float(r)) for a, r in zip(s[jump], right[jump])]

    # -- views

    def shifted(self, delta):
        """The function ``t -> f(t - delta)``."""
        return Shifted(self, delta)

    def __mul__(self, other):
        if isinstance(other, RegulatedFn):
            return Product(self, other)
        return Product(self, Constant(float(other), self.domain_start, self.domain_end))

    __rmul__ = __mul__

    # -- validation

    def sample_grid(self, per_segment=17):
        pts = []
        for a, b in zip(self.breaks[:-1], self.breaks[1:]):
            if math.isinf(a) and math.isinf(b):
                inner = np.concatenate([-np.geomspace(1e3, 1e-3, 7), [0.0],
                                        np.geomspace(1e-3, 1e3, 7)])
            elif math.isinf(b):
                inner = a + np.geomspace(1e-3, 1e3, per_segment)
            elif math.isinf(a):
                inner = b - np.geomspace(1e3, 1e-3, per_segment)
            else:
                inner = a + (b - a) * (np.arange(1, per_segment + 1) / (per_segment + 1))
            pts.append(inner)
        return np.concatenate(pts)

    def validate(self):
        """Check bodies on a sample grid and left-continuity at breakpoints.

        Raises :class:`RegulatedFnError` on the first problem found.
        """
        samples = self.sample_grid()
        for seg in range(self.n_segments):
            a, b = self.breaks[seg], self.breaks[seg + 1]
            grid = samples[(samples > a) & (samples < b)]
            try:
                vals = self._body(grid, np.full(grid.shape, seg))
            except _expr.DomainError as exc:
                raise RegulatedFnError(f"segment ({a}, {b}]: {exc}") from exc
            if not np.all(np.isfinite(vals)):
                raise RegulatedFnError(f"segment ({a}, {b}]: non-finite values")
        ends = self.breaks[1:]
        for seg, s in enumerate(ends):
            if math.isinf(s):
                continue
            self._check_left_continuity(seg, float(s))

    def _check_left_continuity(self, seg, s):
        scale_t = max(1.0, abs(s))
        hs = np.array([1e-4, 1e-6, 1e-8]) * scale_t
        a = self.breaks[seg]
        hs = hs[s - hs > a]
        if hs.size < 2:
            return
        try:
            at_s = float(self._body(np.array([s]), np.array([seg]))[0])
            near = self._body(s - hs, np.full(hs.shape, seg))
        except _expr.DomainError as exc:
            raise RegulatedFnError(f"not left-continuous at {s}: {exc}") from exc
        # Richardson: linear extrapolation of the last two samples to h = 0
        h1, h2 = hs[-2], hs[-1]
        f1, f2 = near[-2], near[-1]
        limit = f2 - (f1 - f2) * h2 / (h1 - h2)
        tol = 1e-7 * max(1.0, abs(at_s), float(np.max(np.abs(near))))
        if not (np.isfinite(limit) and abs(limit - at_s) <= tol):
            raise RegulatedFnError(
                f"not left-continuous at {s}: f(s)={at_s!r}, left limit ~ {limit!r}")

    def to_dict(self):
        return {
            "kind": type(self).__name__,
            "domain": [_json_float(self.domain_start), _json_float(self.domain_end)],
            "breakpoints": [_json_float(x) for x in self.interior_breaks],
            "jumps": [[s, r] for s, r in self.jump_points],
        }


def _json_float(x):
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


class Piecewise(RegulatedFn):
    """Segments with expression (or callable, or constant) bodies."""

    def __init__(self, breaks, bodies, *, validate=True):
        super().__init__(breaks)
        if len(bodies) != self.n_segments:
            raise RegulatedFnError(
                f"{self.n_segments} segments but {len(bodies)} bodies")
        self.sources = list(bodies)
        self._fns = [_as_body(b) for b in bodies]
        self._fns_right = [_as_body(b, "right") for b in bodies]
        if validate:
            self.validate()

    @staticmethod
    def _run(fns, t, seg):
        if len(fns) == 1:
            return np.asarray(fns[0](t), dtype=float)
        out = np.empty(t.shape)
        for s in np.unique(seg):
            m = seg == s
            out[m] = fns[s](t[m])
        return out

    def _body(self, t, seg):
        return self._run(self._fns, t, seg)

    def _body_right(self, t, seg):
        return self._run(self._fns_right, t, seg)

    def to_dict(self):
        d = super().to_dict()
        d["bodies"] = [_expr.to_text(b) if isinstance(b, _expr.Expr) else str(b)
                       for b in self.sources]
        return d


class Constant(RegulatedFn):
    def __init__(self, value, start=-math.inf, end=math.inf):
        super().__init__([start, end])
        self.value = float(value)

    def _body(self, t, seg):
        return np.full(t.shape, self.value)


class StepFunction(RegulatedFn):
    """Constant ``values[i]`` on ``(breaks[i], breaks[i+1]]``."""

    def __init__(self, breaks, values):
        super().__init__(breaks)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != (self.n_segments,):
            raise RegulatedFnError("one value per segment required")

    def _body(self, t, seg):
        return self.values[seg]


class PiecewiseLinear(RegulatedFn):
    """Linear interpolant of samples with optional jumps.

    ``left[i]`` is the value at ``x[i]``; ``right[i]`` the right limit there
    (defaults to ``left``).  Segment ``i`` runs linearly from ``right[i]`` to
    ``left[i+1]``.
    """

    def __init__(self, x, left, right=None):
        super().__init__(x)
        self.left = np.asarray(left, dtype=float)
        self.right = self.left if right is None else np.asarray(right, dtype=float)
        if self.left.shape != self.breaks.shape or self.right.shape != self.breaks.shape:
            raise RegulatedFnError("x, left and right must have the same length")
        self._slope = (self.left[1:] - self.right[:-1]) / np.diff(self.breaks)

    def _body(self, t, seg):
        return self.right[seg] + self._slope[seg] * (t - self.breaks[seg])


class Shifted(RegulatedFn):
    """``t -> f(t - delta)``."""

    def __init__(self, f, delta):
        super().__init__(f.breaks + delta)
        self.base = f
        self.delta = float(delta)

    def _body(self, t, seg):
        return self.base._body(t - self.delta, seg)

    def _body_right(self, t, seg):
        return self.base._body_right(t - self.delta, seg)


class Product(RegulatedFn):
    """Pointwise product on the common domain."""

    def __init__(self, *factors):
        lo = max(f.domain_start for f in factors)
        hi = min(f.domain_end for f in factors)
        if not lo < hi:
            raise RegulatedFnError("factors have no common domain")
        pts = np.unique(np.concatenate([f.breaks for f in factors]))
        pts = pts[(pts > lo) & (pts < hi)]
        super().__init__(np.concatenate([[lo], pts, [hi]]))
        self.factors = factors
        a, b = self.breaks[:-1], self.breaks[1:]
        mid = np.where(np.isinf(b), a + 1.0, np.where(np.isinf(a), b - 1.0, 0.5 * (a + b)))
        self._maps = [f._segment_right(mid) for f in factors]

    def _body(self, t, seg, right=False):
        def ev(f, m):
            return f._body_right(t, m[seg]) if right else f._body(t, m[seg])
        out = ev(self.factors[0], self._maps[0])
        for f, m in zip(self.factors[1:], self._maps[1:]):
            out = out * ev(f, m)
        return out

    def _body_right(self, t, seg):
        return self._body(t, seg, right=True)


class Joined(RegulatedFn):
    """Concatenation of functions on abutting domains."""

    def __init__(self, *parts):
        for f, g in zip(parts, parts[1:]):
            if f.domain_end != g.domain_start:
                raise RegulatedFnError(
                    f"parts do not abut: {f.domain_end} != {g.domain_start}")
        super().__init__(np.concatenate([parts[0].breaks] + [p.breaks[1:] for p in parts[1:]]))
        self.parts = parts
        self._offsets = np.cumsum([0] + [p.n_segments for p in parts])

    def _body(self, t, seg, right=False):
        which = np.searchsorted(self._offsets, seg, side="right") - 1
        out = np.empty(t.shape)
        for k in np.unique(which):
            m = which == k
            part = self.parts[k]
            ev = part._body_right if right else part._body
            out[m] = ev(t[m], seg[m] - self._offsets[k])
        return out

    def _body_right(self, t, seg):
        return self._body(t, seg, right=True)


class Restricted(RegulatedFn):
    """``f`` on ``[lo, hi]``.

    Endpoints may overshoot ``f``'s domain by ``slack`` (relative), which
    absorbs roundoff from shifting domains by a delay; the end bodies are
    extended over the overshoot.
    """

    def __init__(self, f, lo, hi, slack=1e-12):
        margin = slack * max(1.0, abs(lo), abs(hi))
        if lo < f.domain_start - margin or hi > f.domain_end + margin:
            raise RegulatedFnError(
                f"[{lo}, {hi}] not inside [{f.domain_start}, {f.domain_end}]")
        inner = f.interior_breaks
        inner = inner[(inner > lo) & (inner < hi)]
        super().__init__(np.concatenate([[lo], inner, [hi]]))
        self.base = f
        a, b = self.breaks[:-1], self.breaks[1:]
        mid = np.where(np.isinf(b), a + 1.0, np.where(np.isinf(a), b - 1.0, 0.5 * (a + b)))
        self._map = f._segment_right(mid)

    def _body(self, t, seg):
        return self.base._body(t, self._map[seg])

    def _body_right(self, t, seg):
        return self.base._body_right(t, self._map[seg])


def constant(value, start=-math.inf, end=math.inf):
    return Constant(value, start, end)


def from_expr(e, start, end=math.inf, *, validate=True):
    """Single-expression function, split at the expression's own
    discontinuities (chi endpoints, guard thresholds)."""
    if isinstance(e, str):
        e = _expr.parse(e)
    cuts = [c for c in _expr.discontinuities(e) if start < c < end]
    return Piecewise([start, *cuts, end], [e] * (len(cuts) + 1), validate=validate)
