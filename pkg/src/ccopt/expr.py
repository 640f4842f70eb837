"""Expression trees for objectives and constraint functions.

Expressions are built over decision variables ``x[i]``, per-sample noise
variables ``y[j]``, named scalar parameters, and constants.  The text grammar
accepted by :func:`parse` is

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ['^' int]
    atom   := number | 'x[' int ']' | 'y[' int ']' | ident
            | 'exp(' expr ')' | 'ln(' expr ')' | 'abs(' expr ')'
            | 'max(' expr (',' expr)+ ')' | 'sumsq(' expr (',' expr)+ ')'
            | '(' expr ')' | '-' atom

Constant subtrees are folded at construction time, so ``exp(x[0])*0``
collapses to the constant 0 and a division by a literal zero is rejected
immediately.  Trees are immutable and compare structurally.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Expr",
    "AffineForm",
    "ExprError",
    "ParseError",
    "EvalError",
    "const",
    "x",
    "y",
    "param",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "powi",
    "exp",
    "ln",
    "abs_",
    "max_",
    "sumsq",
    "parse",
    "to_str",
    "evaluate",
    "eval_rows",
    "grad_fd",
    "detect_affine",
    "bind_samples",
    "max_indices",
    "interval_rows",
]


class ExprError(ValueError):
    """Malformed expression construction (bad arity, non-finite constant)."""


class ParseError(ExprError):
    """Syntax or naming error in expression text; carries a position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class EvalError(ArithmeticError):
    """Domain error or non-finite value during strict evaluation."""


_LEAF_KINDS = ("const", "xvar", "yvar", "param")
_CALLS = {"exp": 1, "ln": 1, "abs": 1, "max": -2, "sumsq": -2}


@dataclass(frozen=True)
class Expr:
    """Immutable expression node.

    ``kind`` is one of const, xvar, yvar, param, add, sub, mul, div, neg,
    pow, exp, ln, abs, max, sumsq.  ``value`` holds the constant (const),
    the variable index (xvar/yvar), the name (param) or the integer
    exponent (pow).
    """

    kind: str
    args: tuple = field(default=())
    value: object = None

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return sub(self, as_expr(other))

    def __rsub__(self, other):
        return sub(as_expr(other), self)

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return powi(self, k)

    def __str__(self):
        return to_str(self)


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, (int, float, np.integer, np.floating)):
        return const(float(v))
    raise ExprError(f"cannot coerce {type(v).__name__} to Expr")


def const(v: float) -> Expr:
    v = float(v)
    if not math.isfinite(v):
        raise ExprError("constants must be finite")
    return Expr("const", (), v)


def x(i: int) -> Expr:
    if i < 0:
        raise ExprError("negative decision index")
    return Expr("xvar", (), int(i))


def y(i: int) -> Expr:
    if i < 0:
        raise ExprError("negative sample index")
    return Expr("yvar", (), int(i))


def param(name: str) -> Expr:
    return Expr("param", (), str(name))


def _is_const(e: Expr) -> bool:
    return e.kind == "const"


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    # annihilation keeps downstream affine detection exact
    if _is_const(a) and a.value == 0.0:
        return const(0.0)
    if _is_const(b) and b.value == 0.0:
        return const(0.0)
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b) and b.value == 0.0:
        raise ExprError("division by constant zero")
    if _is_const(a) and _is_const(b):
        return const(a.value / b.value)
    return Expr("div", (a, b))


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return const(-a.value)
    return Expr("neg", (a,))


def powi(a: Expr, k: int) -> Expr:
    if isinstance(k, float) and k != int(k):
        raise ExprError("exponent must be an integer")
    k = int(k)
    if k == 0:
        return const(1.0)
    if k == 1:
        return a
    if _is_const(a):
        if a.value == 0.0 and k < 0:
            raise ExprError("zero to a negative power")
        try:
            return const(float(a.value) ** k)
        except OverflowError:
            raise ExprError("pow overflow in constant folding") from None
    return Expr("pow", (a,), k)


def exp(a: Expr) -> Expr:
    if _is_const(a):
        try:
            v = math.exp(a.value)
        except OverflowError:
            raise ExprError("exp overflow in constant folding") from None
        if not math.isfinite(v):
            raise ExprError("exp overflow in constant folding")
        return const(v)
    return Expr("exp", (a,))


def ln(a: Expr) -> Expr:
    if _is_const(a):
        if a.value <= 0.0:
            raise ExprError("ln of a non-positive constant")
        return const(math.log(a.value))
    return Expr("ln", (a,))


def abs_(a: Expr) -> Expr:
    if _is_const(a):
        return const(abs(a.value))
    return Expr("abs", (a,))


def max_(*args: Expr) -> Expr:
    if len(args) < 2:
        raise ExprError("max takes at least two arguments")
    if all(_is_const(a) for a in args):
        return const(max(a.value for a in args))
    return Expr("max", tuple(args))


def sumsq(*args: Expr) -> Expr:
    if len(args) < 2:
        raise ExprError("sumsq takes at least two arguments")
    if all(_is_const(a) for a in args):
        return const(sum(a.value ** 2 for a in args))
    return Expr("sumsq", tuple(args))


_BUILDERS = {
    "add": add, "sub": sub, "mul": mul, "div": div, "neg": neg,
    "exp": exp, "ln": ln, "abs": abs_, "max": max_, "sumsq": sumsq,
}


def rebuild(kind: str, args, value=None) -> Expr:
    """Reconstruct a node through the folding constructors."""
    if kind == "const":
        return const(value)
    if kind == "xvar":
        return x(value)
    if kind == "yvar":
        return y(value)
    if kind == "param":
        return param(value)
    if kind == "pow":
        return powi(args[0], value)
    return _BUILDERS[kind](*args)


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<sym>\^|\+|-|\*|/|\(|\)|\[|\]|,))"
)


class _Parser:
    def __init__(self, text: str, n, d, params):
        self.text = text
        self.n = n
        self.d = d
        self.params = params
        self.pos = 0

    def error(self, msg: str):
        raise ParseError(msg, self.pos)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            return None, None
        m = _TOKEN_RE.match(self.text, self.pos)
        if m is None:
            self.error(f"unexpected character {self.text[self.pos]!r}")
        if m.lastgroup == "num":
            return "num", m.group()
        if m.lastgroup == "name":
            return "name", m.group()
        return m.group(), m.group()

    def take(self):
        kind, tok = self.peek()
        if tok is not None:
            self.pos += len(tok)
        return kind, tok

    def expect(self, sym: str):
        kind, tok = self.take()
        if tok != sym:
            self.error(f"expected {sym!r}, found {tok!r}")

    def parse(self) -> Expr:
        e = self.expr()
        kind, tok = self.peek()
        if tok is not None:
            self.error(f"trailing input {tok!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, tok = self.peek()
            if tok == "+":
                self.take()
                e = add(e, self.term())
            elif tok == "-":
                self.take()
                e = sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            kind, tok = self.peek()
            if tok == "*":
                self.take()
                e = mul(e, self.factor())
            elif tok == "/":
                rhs_pos = self.pos
                self.take()
                try:
                    e = div(e, self.factor())
                except ExprError as err:
                    if isinstance(err, ParseError):
                        raise
                    raise ParseError(str(err), rhs_pos) from None
            else:
                return e

    def factor(self) -> Expr:
        e = self.atom()
        kind, tok = self.peek()
        if tok == "^":
            self.take()
            k = self.integer()
            e = powi(e, k)
        return e

    def integer(self) -> int:
        sign = 1
        kind, tok = self.peek()
        if tok == "-":
            self.take()
            sign = -1
            kind, tok = self.peek()
        if kind != "num" or ("." in tok or "e" in tok or "E" in tok):
            self.error("exponent must be an integer literal")
        self.take()
        return sign * int(tok)

    def index(self) -> int:
        kind, tok = self.peek()
        if kind != "num" or ("." in tok or "e" in tok or "E" in tok):
            self.error("index must be a nonnegative integer literal")
        self.take()
        return int(tok)

    def atom(self) -> Expr:
        kind, tok = self.peek()
        if tok is None:
            self.error("unexpected end of input")
        if tok == "-":
            self.take()
            return neg(self.atom())
        if tok == "(":
            self.take()
            e = self.expr()
            self.expect(")")
            return e
        if kind == "num":
            self.take()
            return const(float(tok))
        if kind == "name":
            at = self.pos
            self.take()
            nxt_kind, nxt = self.peek()
            if tok in ("x", "y") and nxt == "[":
                self.take()
                i = self.index()
                self.expect("]")
                bound = self.n if tok == "x" else self.d
                if bound is not None and i >= bound:
                    self.pos = at
                    self.error(f"index {tok}[{i}] out of declared bounds")
                return x(i) if tok == "x" else y(i)
            if nxt == "(":
                if tok not in _CALLS:
                    self.pos = at
                    self.error(f"unknown function {tok!r}")
                self.take()
                args = [self.expr()]
                while True:
                    k2, t2 = self.peek()
                    if t2 == ",":
                        self.take()
                        args.append(self.expr())
                    else:
                        break
                self.expect(")")
                arity = _CALLS[tok]
                if arity > 0 and len(args) != arity:
                    self.pos = at
                    self.error(f"{tok} takes exactly {arity} argument(s)")
                if arity == -2 and len(args) < 2:
                    self.pos = at
                    self.error(f"{tok} takes at least two arguments")
                try:
                    return _BUILDERS[tok](*args)
                except ExprError as err:
                    self.pos = at
                    self.error(str(err))
            if self.params is not None and tok not in self.params:
                self.pos = at
                self.error(f"unknown identifier {tok!r}")
            return param(tok)
        self.error(f"unexpected token {tok!r}")


def parse(text: str, n: int | None = None, d: int | None = None,
          params=None) -> Expr:
    """Parse expression text.

    ``n`` and ``d`` bound the usable x/y indices when given.  ``params`` is
    an optional collection of admissible parameter names; when provided any
    other bare identifier is rejected.
    """
    return _Parser(text, n, d, params).parse()


# ---------------------------------------------------------------------------
# printing

def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_str(e: Expr, names=None) -> str:
    """Render to grammar-compatible text; parse(to_str(e)) == e.

    ``names`` optionally maps decision-variable index to a display name
    (used for debug dumps of encoded programs; such output is not meant to
    be reparsed).
    """

    def p(node: Expr, minlevel: int) -> str:
        s, level = render(node)
        if level < minlevel:
            return f"({s})"
        return s

    def render(node: Expr):
        k = node.kind
        if k == "const":
            v = node.value
            if v < 0:
                return f"-{_fmt_const(-v)}", 4
            return _fmt_const(v), 4
        if k == "xvar":
            if names is not None:
                return names[node.value], 4
            return f"x[{node.value}]", 4
        if k == "yvar":
            return f"y[{node.value}]", 4
        if k == "param":
            return node.value, 4
        if k == "add":
            return f"{p(node.args[0], 1)} + {p(node.args[1], 2)}", 1
        if k == "sub":
            return f"{p(node.args[0], 1)} - {p(node.args[1], 2)}", 1
        if k == "mul":
            return f"{p(node.args[0], 2)} * {p(node.args[1], 3)}", 2
        if k == "div":
            return f"{p(node.args[0], 2)} / {p(node.args[1], 3)}", 2
        if k == "neg":
            return f"-{p(node.args[0], 4)}", 4
        if k == "pow":
            return f"{p(node.args[0], 4)}^{node.value}", 3
        if k in ("exp", "ln", "abs", "max", "sumsq"):
            inner = ", ".join(p(a, 1) for a in node.args)
            return f"{k}({inner})", 4
        raise ExprError(f"unknown node kind {k!r}")

    return render(e)[0]


# ---------------------------------------------------------------------------
# evaluation

def _ev(e: Expr, xv, yv, params, strict: bool):
    k = e.kind
    if k == "const":
        return e.value
    if k == "xvar":
        return xv[e.value]
    if k == "yvar":
        if yv is None:
            raise EvalError("expression uses y but no sample was given")
        if yv.ndim == 2:
            return yv[:, e.value]
        return yv[e.value]
    if k == "param":
        if params is None or e.value not in params:
            raise EvalError(f"unbound parameter {e.value!r}")
        return params[e.value]
    a = _ev(e.args[0], xv, yv, params, strict)
    if k == "neg":
        return -a
    if k == "exp":
        with np.errstate(over="ignore"):
            v = np.exp(a)
        if strict and not np.all(np.isfinite(v)):
            raise EvalError("exp overflow")
        return v
    if k == "ln":
        if strict and np.any(np.asarray(a) <= 0.0):
            raise EvalError("ln of a non-positive value")
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(a)
    if k == "abs":
        return np.abs(a)
    if k == "pow":
        if strict and e.value < 0 and np.any(np.asarray(a) == 0.0):
            raise EvalError("zero to a negative power")
        with np.errstate(divide="ignore", over="ignore"):
            v = np.power(a, e.value, dtype=float) if e.value >= 0 else \
                np.asarray(a, dtype=float) ** e.value
        if strict and not np.all(np.isfinite(v)):
            raise EvalError("pow overflow")
        return v
    if k == "max":
        vals = [a] + [_ev(c, xv, yv, params, strict) for c in e.args[1:]]
        out = vals[0]
        for v in vals[1:]:
            out = np.maximum(out, v)
        return out
    if k == "sumsq":
        out = np.square(a)
        for c in e.args[1:]:
            out = out + np.square(_ev(c, xv, yv, params, strict))
        return out
    b = _ev(e.args[1], xv, yv, params, strict)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if k == "div":
        if strict and np.any(np.asarray(b) == 0.0):
            raise EvalError("division by zero")
        with np.errstate(divide="ignore", invalid="ignore"):
            return a / b
    raise ExprError(f"unknown node kind {k!r}")


def evaluate(e: Expr, x=(), y=None, params=None) -> float:
    """Strict scalar evaluation; raises EvalError on any domain problem."""
    xv = np.asarray(x, dtype=float)
    yv = None if y is None else np.asarray(y, dtype=float)
    v = _ev(e, xv, yv, params, True)
    v = float(v)
    if not math.isfinite(v):
        raise EvalError("expression evaluated to a non-finite value")
    return v


def eval_rows(e: Expr, x, rows, params=None, strict: bool = False) -> np.ndarray:
    """Evaluate once per sample row; returns shape (len(rows),).

    Non-strict mode lets non-finite values through (solvers clamp them);
    strict mode raises, which calibration paths rely on.
    """
    xv = np.asarray(x, dtype=float)
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    v = _ev(e, xv, rows, params, strict)
    out = np.broadcast_to(np.asarray(v, dtype=float), (rows.shape[0],)).copy()
    if strict and not np.all(np.isfinite(out)):
        raise EvalError("expression evaluated to a non-finite value")
    return out


def grad_fd(e: Expr, x, y=None, params=None, step: float | None = None) -> np.ndarray:
    """Central finite-difference gradient in the decision variables."""
    xv = np.asarray(x, dtype=float).copy()
    g = np.zeros_like(xv)
    for i in range(xv.size):
        h = step if step is not None else max(1e-6, 1e-7 * abs(xv[i]))
        xi = xv[i]
        xv[i] = xi + h
        up = evaluate(e, xv, y, params)
        xv[i] = xi - h
        dn = evaluate(e, xv, y, params)
        xv[i] = xi
        g[i] = (up - dn) / (2.0 * h)
    return g


# ---------------------------------------------------------------------------
# structure utilities

@dataclass(frozen=True)
class AffineForm:
    """c0 + coeffs . x, the result of a successful affine detection."""

    const: float
    coeffs: np.ndarray

    def value(self, x) -> float:
        return float(self.const + np.dot(self.coeffs, np.asarray(x, dtype=float)))


def detect_affine(e: Expr, n: int, y=None, params=None) -> AffineForm | None:
    """Return an AffineForm when e is affine in x (samples fixed), else None."""
    yv = None if y is None else np.asarray(y, dtype=float)

    def go(node: Expr):
        k = node.kind
        if k == "const":
            return node.value, np.zeros(n)
        if k == "xvar":
            v = np.zeros(n)
            v[node.value] = 1.0
            return 0.0, v
        if k == "yvar":
            if yv is None:
                raise ExprError("detect_affine needs a sample row for y vars")
            return float(yv[node.value]), np.zeros(n)
        if k == "param":
            if params is None or node.value not in params:
                raise ExprError(f"unbound parameter {node.value!r}")
            return float(params[node.value]), np.zeros(n)
        if k == "neg":
            r = go(node.args[0])
            if r is None:
                return None
            return -r[0], -r[1]
        if k == "add" or k == "sub":
            ra, rb = go(node.args[0]), go(node.args[1])
            if ra is None or rb is None:
                return None
            s = 1.0 if k == "add" else -1.0
            return ra[0] + s * rb[0], ra[1] + s * rb[1]
        if k == "mul":
            ra, rb = go(node.args[0]), go(node.args[1])
            if ra is None or rb is None:
                return None
            if not np.any(ra[1]):
                return ra[0] * rb[0], ra[0] * rb[1]
            if not np.any(rb[1]):
                return rb[0] * ra[0], rb[0] * ra[1]
            return None
        if k == "div":
            ra, rb = go(node.args[0]), go(node.args[1])
            if ra is None or rb is None:
                return None
            if np.any(rb[1]) or rb[0] == 0.0:
                return None
            return ra[0] / rb[0], ra[1] / rb[0]
        return None

    r = go(e)
    if r is None:
        return None
    return AffineForm(float(r[0]), np.asarray(r[1], dtype=float))


def bind_samples(e: Expr, yrow) -> Expr:
    """Substitute numeric sample values for y vars and refold constants."""
    yrow = np.asarray(yrow, dtype=float)

    def go(node: Expr) -> Expr:
        if node.kind == "yvar":
            return const(float(yrow[node.value]))
        if node.kind in _LEAF_KINDS:
            return node
        return rebuild(node.kind, tuple(go(a) for a in node.args), node.value)

    return go(e)


def max_indices(e: Expr) -> tuple[int, int]:
    """Largest x and y indices used (-1 when absent)."""
    mx, my = -1, -1
    stack = [e]
    while stack:
        node = stack.pop()
        if node.kind == "xvar":
            mx = max(mx, node.value)
        elif node.kind == "yvar":
            my = max(my, node.value)
        stack.extend(node.args)
    return mx, my


def interval_rows(e: Expr, lo, hi, rows, params=None):
    """Interval image of e over the x-box, one interval per sample row.

    Returns (lov, hiv) arrays of shape (len(rows),).  Raises EvalError when
    the image is unbounded or leaves a function's domain (division through
    zero, ln touching zero) anywhere over the box.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    m = rows.shape[0]

    def go(node: Expr):
        k = node.kind
        if k == "const":
            v = np.full(m, node.value)
            return v, v.copy()
        if k == "xvar":
            return np.full(m, lo[node.value]), np.full(m, hi[node.value])
        if k == "yvar":
            col = rows[:, node.value]
            return col.copy(), col.copy()
        if k == "param":
            if params is None or node.value not in params:
                raise EvalError(f"unbound parameter {node.value!r}")
            v = np.full(m, float(params[node.value]))
            return v, v.copy()
        if k == "neg":
            a, b = go(node.args[0])
            return -b, -a
        if k == "add":
            a1, b1 = go(node.args[0])
            a2, b2 = go(node.args[1])
            return a1 + a2, b1 + b2
        if k == "sub":
            a1, b1 = go(node.args[0])
            a2, b2 = go(node.args[1])
            return a1 - b2, b1 - a2
        if k == "mul":
            a1, b1 = go(node.args[0])
            a2, b2 = go(node.args[1])
            c = np.stack([a1 * a2, a1 * b2, b1 * a2, b1 * b2])
            return c.min(axis=0), c.max(axis=0)
        if k == "div":
            a1, b1 = go(node.args[0])
            a2, b2 = go(node.args[1])
            if np.any((a2 <= 0.0) & (b2 >= 0.0)):
                raise EvalError("interval division through zero")
            c = np.stack([a1 / a2, a1 / b2, b1 / a2, b1 / b2])
            return c.min(axis=0), c.max(axis=0)
        if k == "pow":
            a, b = go(node.args[0])
            kk = node.value
            if kk < 0:
                if np.any((a <= 0.0) & (b >= 0.0)):
                    raise EvalError("interval power through zero")
                lo2, hi2 = go(Expr("pow", node.args, -kk))
                c = np.stack([1.0 / lo2, 1.0 / hi2])
                return c.min(axis=0), c.max(axis=0)
            pa, pb = a ** kk, b ** kk
            if kk % 2 == 1:
                return pa, pb
            top = np.maximum(np.abs(a), np.abs(b)) ** kk
            bot = np.where((a <= 0.0) & (b >= 0.0), 0.0,
                           np.minimum(np.abs(a), np.abs(b)) ** kk)
            return bot, top
        if k == "exp":
            a, b = go(node.args[0])
            with np.errstate(over="ignore"):
                ea, eb = np.exp(a), np.exp(b)
            if not np.all(np.isfinite(eb)):
                raise EvalError("interval exp overflow")
            return ea, eb
        if k == "ln":
            a, b = go(node.args[0])
            if np.any(a <= 0.0):
                raise EvalError("interval ln touching zero")
            return np.log(a), np.log(b)
        if k == "abs":
            a, b = go(node.args[0])
            top = np.maximum(np.abs(a), np.abs(b))
            bot = np.where((a <= 0.0) & (b >= 0.0), 0.0,
                           np.minimum(np.abs(a), np.abs(b)))
            return bot, top
        if k == "max":
            los, his = zip(*(go(c) for c in node.args))
            return np.max(np.stack(los), axis=0), np.max(np.stack(his), axis=0)
        if k == "sumsq":
            tl = np.zeros(m)
            th = np.zeros(m)
            for c in node.args:
                a, b = go(Expr("pow", (c,), 2))
                tl += a
                th += b
            return tl, th
        raise ExprError(f"unknown node kind {k!r}")

    lov, hiv = go(e)
    if not (np.all(np.isfinite(lov)) and np.all(np.isfinite(hiv))):
        raise EvalError("unbounded interval image")
    return lov, hiv
