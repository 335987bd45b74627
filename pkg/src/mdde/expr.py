"""Small expression language used for coefficients, densities and histories.

Grammar, lowest to highest precedence::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?                  right associative
    atom    := NUMBER | 't' | 'ae_except_rationals' | '(' expr ')'
             | FUNC '(' expr ')'
             | 'chi' '(' bound ',' bound ')'
             | 'piecewise' '(' guard ',' expr (',' guard ',' expr)* ',' expr ')'
    bound   := expr | 'inf' | '-' 'inf'           constant, no t
    guard   := conj ('or' conj)*
    conj    := neg ('and' neg)*
    neg     := 'not' neg | expr RELOP expr | '(' guard ')'

FUNC is one of exp, log, sin, cos, sqrt, abs.  RELOP is one of
``< <= > >=``.

Two conventions keep everything left-continuous:

* ``chi(a, b)`` is the indicator of the half-open interval ``(a, b]``;
* a comparison of ``t`` with a constant that ties takes the branch on the
  smaller-``t`` side, so ``t < c`` and ``t <= c`` both hold at ``t == c``
  while ``t > c`` and ``t >= c`` both fail there (``c > t`` likewise holds).
  Other comparisons use ``<=`` and ``>`` at ties.

``ae_except_rationals`` stands for the indicator of the irrationals.  It
differs from 1 only on a null set, so it evaluates to 1 everywhere; it is
kept in the tree for display.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "AeMarker", "Neg", "BinOp", "Func", "Chi", "Inf",
    "Compare", "Logic", "Not", "Piecewise",
    "ExprError", "ExprSyntaxError", "UnknownIdentifierError", "ArityError",
    "DomainError",
    "parse", "to_text", "evaluate", "compile_expr", "discontinuities",
    "depends_on_t", "has_null_exceptions",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt", "abs")
RELOPS = ("<=", ">=", "<", ">")


# ---------------------------------------------------------------------------
# AST


class Expr:
    """Base class of all expression nodes (immutable)."""

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    pass


@dataclass(frozen=True)
class AeMarker(Expr):
    pass


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


@dataclass(frozen=True)
class Inf(Expr):
    """Infinite endpoint; only legal inside ``chi``."""
    negative: bool = False


@dataclass(frozen=True)
class Chi(Expr):
    lo: Expr
    hi: Expr


@dataclass(frozen=True)
class Compare(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Logic(Expr):
    op: str  # "and" | "or"
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


@dataclass(frozen=True)
class Piecewise(Expr):
    branches: tuple  # ((guard, value), ...)
    default: Expr


# ---------------------------------------------------------------------------
# errors


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message, text, offset, expected=()):
        self.offset = offset
        self.byte_offset = len(text[:offset].encode("utf-8"))
        self.line = text.count("\n", 0, offset) + 1
        self.column = offset - (text.rfind("\n", 0, offset) + 1) + 1
        self.expected = frozenset(expected)
        msg = f"{message} at line {self.line}, column {self.column}"
        if self.expected:
            msg += " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(msg)


class UnknownIdentifierError(ExprSyntaxError):
    pass


class ArityError(ExprSyntaxError):
    pass


class DomainError(ExprError):
    def __init__(self, message, node):
        self.node = node
        super().__init__(f"{message} in '{to_text(node)}'")


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|[-+*/^(),<>])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | ident | op | eof
    text: str
    pos: int


def _tokenize(text):
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, message, expected=(), cls=ExprSyntaxError, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return cls(f"{message}, found {found}", self.text, tok.pos, expected)

    def accept(self, text):
        if self.tok.kind in ("op", "ident") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            raise self.error("syntax error", {repr(text)})

    # numeric grammar

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Num(float(tok.text))
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name == "t":
                return Var()
            if name == "ae_except_rationals":
                return AeMarker()
            if name in FUNCTIONS:
                args = self.call_args(name, tok, 1)
                return Func(name, args[0])
            if name == "chi":
                return self.chi(tok)
            if name == "piecewise":
                return self.piecewise(tok)
            if name == "inf":
                raise self.error("'inf' is only allowed as an endpoint of chi", tok=tok)
            raise self.error(f"unknown identifier {name!r}", cls=UnknownIdentifierError, tok=tok)
        raise self.error("syntax error", {"number", "t", "(", "-", "function"})

    def call_args(self, name, name_tok, arity):
        self.expect("(")
        args = [self.expr()]
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        if len(args) != arity:
            raise ArityError(
                f"{name} takes {arity} argument(s), got {len(args)}",
                self.text, name_tok.pos)
        return args

    def bound(self):
        start = self.i
        if self.accept("inf"):
            return Inf(False)
        if self.accept("-"):
            if self.accept("inf"):
                return Inf(True)
            self.i = start
        tok = self.tok
        node = self.expr()
        if depends_on_t(node):
            raise ExprSyntaxError("chi endpoints must not depend on t", self.text, tok.pos)
        return node

    def chi(self, name_tok):
        self.expect("(")
        lo = self.bound()
        if not self.accept(","):
            if self.tok.text == ")":
                raise ArityError("chi takes 2 argument(s), got 1", self.text, name_tok.pos)
            raise self.error("syntax error", {"','"})
        hi = self.bound()
        if self.accept(","):
            raise ArityError("chi takes 2 argument(s), got more", self.text, name_tok.pos)
        self.expect(")")
        return Chi(lo, hi)

    def piecewise(self, name_tok):
        self.expect("(")
        branches = []
        while True:
            save = self.i
            try:
                guard = self.guard()
            except ExprSyntaxError:
                # the final argument is the default value
                self.i = save
                if not branches:
                    raise
                default = self.expr()
                self.expect(")")
                return Piecewise(tuple(branches), default)
            if not self.accept(","):
                raise ArityError(
                    "piecewise needs guard/value pairs followed by a default",
                    self.text, name_tok.pos)
            branches.append((guard, self.expr()))
            if not self.accept(","):
                raise ArityError(
                    "piecewise needs a default value after the last branch",
                    self.text, name_tok.pos)

    # boolean grammar

    def guard(self):
        node = self.conj()
        while self.accept("or"):
            node = Logic("or", node, self.conj())
        return node

    def conj(self):
        node = self.neg()
        while self.accept("and"):
            node = Logic("and", node, self.neg())
        return node

    def neg(self):
        if self.accept("not"):
            return Not(self.neg())
        save = self.i
        try:
            left = self.expr()
            if self.tok.kind == "op" and self.tok.text in RELOPS:
                op = self.tok.text
                self.i += 1
                return Compare(op, left, self.expr())
            raise self.error("syntax error", set(RELOPS))
        except ExprSyntaxError as first:
            self.i = save
            if not self.accept("("):
                raise first
            try:
                node = self.guard()
                self.expect(")")
            except ExprSyntaxError:
                raise first from None
            return node


def parse(text: str) -> Expr:
    """Parse *text* into an expression tree.

    Raises :class:`ExprSyntaxError` (or one of its subclasses) with the
    byte offset, 1-based line/column and the expected-token set.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    p = _Parser(text)
    node = p.expr()
    if p.tok.kind != "eof":
        raise p.error("syntax error", {"operator", "end of input"})
    return node


# ---------------------------------------------------------------------------
# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _num_text(x):
    if x == math.inf:
        return "1e999"
    return repr(float(x))


def _wrap(s, cond):
    return f"({s})" if cond else s


def to_text(node: Expr) -> str:
    """Print *node* so that parsing the result gives back the same tree."""
    if isinstance(node, Num):
        s = _num_text(abs(node.value))
        return f"(-{s})" if node.value < 0 else s
    if isinstance(node, Var):
        return "t"
    if isinstance(node, AeMarker):
        return "ae_except_rationals"
    if isinstance(node, Inf):
        return "-inf" if node.negative else "inf"
    if isinstance(node, Neg):
        return "-" + _wrap(to_text(node.operand), _prec(node.operand) < 3)
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_text(node.left), to_text(node.right)
        if node.op == "^":
            left = _wrap(left, _prec(node.left) <= 4)
            right = _wrap(right, _prec(node.right) < 3)
            return f"{left}^{right}"
        left = _wrap(left, _prec(node.left) < p)
        right = _wrap(right, _prec(node.right) <= p)
        return f"{left} {node.op} {right}"
    if isinstance(node, Func):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, Chi):
        return f"chi({to_text(node.lo)}, {to_text(node.hi)})"
    if isinstance(node, Compare):
        return f"{to_text(node.left)} {node.op} {to_text(node.right)}"
    if isinstance(node, Logic):
        def side(n):
            weaker = isinstance(n, Logic) and n.op == "or" and node.op == "and"
            return _wrap(to_text(n), weaker)
        right = to_text(node.right)
        right = _wrap(right, isinstance(node.right, Logic)
                      and (node.right.op == node.op or node.op == "and"))
        return f"{side(node.left)} {node.op} {right}"
    if isinstance(node, Not):
        return "not " + _wrap(to_text(node.operand), isinstance(node.operand, Logic))
    if isinstance(node, Piecewise):
        parts = []
        for guard, value in node.branches:
            parts += [to_text(guard), to_text(value)]
        parts.append(to_text(node.default))
        return "piecewise(" + ", ".join(parts) + ")"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# queries


def _children(node):
    if isinstance(node, (Neg, Not)):
        return (node.operand,)
    if isinstance(node, (BinOp, Compare, Logic)):
        return (node.left, node.right)
    if isinstance(node, Func):
        return (node.arg,)
    if isinstance(node, Chi):
        return (node.lo, node.hi)
    if isinstance(node, Piecewise):
        return tuple(x for pair in node.branches for x in pair) + (node.default,)
    return ()


def _walk(node):
    yield node
    for child in _children(node):
        yield from _walk(child)


def depends_on_t(node: Expr) -> bool:
    return any(isinstance(n, Var) for n in _walk(node))


def has_null_exceptions(node: Expr) -> bool:
    return any(isinstance(n, AeMarker) for n in _walk(node))


def _constant(node):
    if isinstance(node, Inf):
        return -math.inf if node.negative else math.inf
    return float(compile_expr(node)(np.zeros(1))[0])


def discontinuities(node: Expr) -> tuple:
    """Finite points where *node* may jump: chi endpoints and guard
    thresholds of the form ``t RELOP const``."""
    pts = set()
    for n in _walk(node):
        if isinstance(n, Chi):
            pts.update(_constant(b) for b in (n.lo, n.hi))
        elif isinstance(n, Compare):
            if isinstance(n.left, Var) and not depends_on_t(n.right):
                pts.add(_constant(n.right))
            elif isinstance(n.right, Var) and not depends_on_t(n.left):
                pts.add(_constant(n.left))
    return tuple(sorted(p for p in pts if math.isfinite(p)))


# ---------------------------------------------------------------------------
# evaluation

Evaluator = Callable[[np.ndarray], np.ndarray]


def _check(bad, message, node):
    if np.any(bad):
        raise DomainError(message, node)


def compile_expr(node: Expr, side: str = "left") -> Evaluator:
    """Compile *node* into a vectorised function of a float array ``t``.

    ``side="right"`` gives right limits at the jumps of indicators and of
    ``t RELOP const`` guards instead of the (left-continuous) values there.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    right = side == "right"
    if isinstance(node, Num):
        v = node.value
        return lambda t: np.full(t.shape, v)
    if isinstance(node, Var):
        return lambda t: t
    if isinstance(node, AeMarker):
        return lambda t: np.ones(t.shape)
    if isinstance(node, Neg):
        f = compile_expr(node.operand, side)
        return lambda t: -f(t)
    if isinstance(node, BinOp):
        f, g = compile_expr(node.left, side), compile_expr(node.right, side)
        if node.op == "+":
            return lambda t: f(t) + g(t)
        if node.op == "-":
            return lambda t: f(t) - g(t)
        if node.op == "*":
            return lambda t: f(t) * g(t)
        if node.op == "/":
            def div(t):
                den = g(t)
                _check(den == 0, "division by zero", node)
                return f(t) / den
            return div

        def power(t):
            base, ex = f(t), g(t)
            _check((base < 0) & (ex != np.round(ex)),
                   "negative base with non-integer exponent", node)
            _check((base == 0) & (ex < 0), "division by zero", node)
            return np.power(base, ex)
        return power
    if isinstance(node, Func):
        f = compile_expr(node.arg, side)
        name = node.name
        if name == "log":
            def log(t):
                x = f(t)
                _check(x <= 0, "log of nonpositive argument", node)
                return np.log(x)
            return log
        if name == "sqrt":
            def sqrt(t):
                x = f(t)
                _check(x < 0, "sqrt of negative argument", node)
                return np.sqrt(x)
            return sqrt
        ufunc = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "abs": np.abs}[name]
        return lambda t: ufunc(f(t))
    if isinstance(node, Chi):
        lo, hi = _constant(node.lo), _constant(node.hi)
        if right:
            return lambda t: ((t >= lo) & (t < hi)).astype(float)
        return lambda t: ((t > lo) & (t <= hi)).astype(float)
    if isinstance(node, Compare):
        f, g = compile_expr(node.left, side), compile_expr(node.right, side)
        below = node.op in ("<", "<=")
        # t against a constant: ties take the value just left of the
        # threshold (left-continuity); side="right" takes the other side
        strict = right
        if isinstance(node.right, Var) and not depends_on_t(node.left):
            strict = not right
        elif not (isinstance(node.left, Var) and not depends_on_t(node.right)):
            strict = False
        if below:
            return (lambda t: f(t) < g(t)) if strict else (lambda t: f(t) <= g(t))
        return (lambda t: f(t) >= g(t)) if strict else (lambda t: f(t) > g(t))
    if isinstance(node, Logic):
        f, g = compile_expr(node.left, side), compile_expr(node.right, side)
        if node.op == "and":
            return lambda t: f(t) & g(t)
        return lambda t: f(t) | g(t)
    if isinstance(node, Not):
        f = compile_expr(node.operand, side)
        return lambda t: ~f(t)
    if isinstance(node, Piecewise):
        compiled = [(compile_expr(c, side), compile_expr(v, side)) for c, v in node.branches]
        default = compile_expr(node.default, side)

        def piecewise(t):
            out = np.empty(t.shape)
            rest = np.ones(t.shape, dtype=bool)
            for cond, value in compiled:
                hit = rest & cond(t)
                if hit.any():
                    out[hit] = value(t[hit])
                rest &= ~hit
            if rest.any():
                out[rest] = default(t[rest])
            return out
        return piecewise
    if isinstance(node, Inf):
        raise ExprError("'inf' cannot be evaluated outside chi")
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(node: Union[Expr, str], t):
    """Evaluate at ``t`` (scalar or array), using the a.e. representative."""
    if isinstance(node, str):
        node = parse(node)
    arr = np.asarray(t, dtype=float)
    out = compile_expr(node)(np.atleast_1d(arr))
    out = np.asarray(out, dtype=float)
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)
