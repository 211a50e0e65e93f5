"""Scalar field expressions over a coordinate chart.

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus and is right associative; its exponent
must fold to a rational constant.  ``FUNC`` is one of exp, ln, sqrt, sin, cos.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import EvaluationError, ExprSyntaxError, UnknownIdentifierError
from .jets import Jet, JetSpace

FUNCTIONS = ("exp", "ln", "sqrt", "sin", "cos")
LAX_VARIABLE = "p"


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: Fraction


Node = Union[Const, Var, Param, Neg, Call, BinOp, Pow]


@dataclass(frozen=True)
class FieldExpr:
    """A parsed expression together with the chart it was parsed against."""

    root: Node
    chart: tuple[str, ...]
    params: tuple[str, ...] = ()
    allow_p: bool = False

    def __str__(self) -> str:
        return to_source(self.root)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.chart + ((LAX_VARIABLE,) if self.allow_p else ())


# ---------------------------------------------------------------------------
# tokenizer and parser

_TOKEN = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            for k, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + k + 1
        else:
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, src: str, names: Sequence[str], params: Sequence[str]):
        self.toks = _tokenize(src)
        self.k = 0
        self.names = set(names)
        self.params = set(params)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.k]

    def advance(self) -> _Tok:
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text: str) -> None:
        t = self.tok
        if t.text != text:
            found = "end of input" if t.kind == "end" else repr(t.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", t.line, t.col)
        self.advance()

    def parse(self) -> Node:
        if self.tok.kind == "end":
            raise ExprSyntaxError("empty expression", 1, 1)
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.line, self.tok.col)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.text == "^":
            t = self.advance()
            exponent = _fold_rational(self.unary())
            if exponent is None:
                raise ExprSyntaxError("exponent must be a rational constant", t.line, t.col)
            return Pow(base, exponent)
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            if t.text in self.names:
                return Var(t.text)
            if t.text in self.params:
                return Param(t.text)
            raise UnknownIdentifierError(t.text, t.line, t.col)
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"unexpected {found}", t.line, t.col)


def _fold_rational(node: Node) -> Fraction | None:
    if isinstance(node, Const):
        return Fraction(repr(node.value))
    if isinstance(node, Neg):
        v = _fold_rational(node.arg)
        return None if v is None else -v
    if isinstance(node, Pow):
        v = _fold_rational(node.base)
        if v is None or node.exponent.denominator != 1:
            return None
        return v ** int(node.exponent)
    if isinstance(node, BinOp):
        a, b = _fold_rational(node.left), _fold_rational(node.right)
        if a is None or b is None:
            return None
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0:
            return None
        return a / b
    return None


def parse(src: str, chart: Sequence[str], allow_p: bool = False,
          params: Sequence[str] = ()) -> FieldExpr:
    """Parse ``src`` over the coordinate names of ``chart``."""
    chart = tuple(chart)
    names = chart + ((LAX_VARIABLE,) if allow_p else ())
    if isinstance(src, (int, float)):
        src = repr(float(src))
    root = _Parser(src, names, params).parse()
    return FieldExpr(root, chart, tuple(params), allow_p)


# ---------------------------------------------------------------------------
# printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _fmt_exponent(r: Fraction) -> str:
    if r.denominator == 1:
        return str(r.numerator) if r >= 0 else f"({r.numerator})"
    return f"({r.numerator}/{r.denominator})"


def to_source(node: Node) -> str:
    """Render an AST so that parsing the text reproduces the same AST."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 3 else f"-({inner})"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if _prec(node.base) < 5 or (isinstance(node.base, Const) and node.base.value < 0):
            base = f"({base})"
        return f"{base}^{_fmt_exponent(node.exponent)}"
    p = _PREC[node.op]
    left = to_source(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = to_source(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# evaluation

def _float_call(func: str, x, node: Node):
    x = np.asarray(x, dtype=float)
    if func == "ln":
        if np.any(x <= 0.0):
            raise EvaluationError("ln of a non-positive value", expression=to_source(node))
        return np.log(x)
    if func == "sqrt":
        if np.any(x < 0.0):
            raise EvaluationError("sqrt of a negative value", expression=to_source(node))
        return np.sqrt(x)
    return getattr(np, func)(x)


def _float_pow(x, r: Fraction, node: Node):
    x = np.asarray(x, dtype=float)
    if r.denominator == 1:
        if r < 0 and np.any(x == 0.0):
            raise EvaluationError("negative power of zero", expression=to_source(node))
        return x ** float(r)
    if np.any(x < 0.0) or (r < 0 and np.any(x == 0.0)):
        raise EvaluationError(f"power {r} of a non-positive value", expression=to_source(node))
    return x ** float(r)


def _is_series(x) -> bool:
    return hasattr(x, "apply") and hasattr(x, "power")


def evaluate(node: Node | FieldExpr, env: Mapping[str, object]):
    """Evaluate an AST with variables bound to jets, series, floats or arrays.

    The result type follows the operands: jets in, jet out.
    """
    if isinstance(node, FieldExpr):
        node = node.root
    if isinstance(node, Const):
        return node.value
    if isinstance(node, (Var, Param)):
        try:
            return env[node.name]
        except KeyError:
            raise EvaluationError(f"no value bound to '{node.name}'") from None
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        try:
            if not _is_series(a) and not _is_series(b):
                if np.any(np.asarray(b) == 0.0):
                    raise EvaluationError("division by zero")
            return a / b
        except EvaluationError as exc:
            raise exc.at(expression=to_source(node)) from None
    if isinstance(node, Call):
        x = evaluate(node.arg, env)
        if _is_series(x):
            try:
                return x.apply(node.func)
            except EvaluationError as exc:
                raise exc.at(expression=to_source(node)) from None
        return _float_call(node.func, x, node)
    if isinstance(node, Pow):
        x = evaluate(node.base, env)
        if _is_series(x):
            try:
                return x.power(node.exponent)
            except EvaluationError as exc:
                raise exc.at(expression=to_source(node)) from None
        return _float_pow(x, node.exponent, node)
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(e: FieldExpr, x0: Sequence[float], order: int,
             params: Mapping[str, float] | None = None, p: float | None = None) -> Jet:
    """Jet of ``e`` at ``x0`` (one variable per chart coordinate).

    When the expression uses the Lax variable, ``p`` supplies its (constant)
    value.
    """
    x0 = [float(v) for v in x0]
    n = len(e.chart)
    if len(x0) != n:
        raise ValueError(f"point has dimension {len(x0)}, chart has {n}")
    space = JetSpace.get(n, order)
    env: dict[str, object] = {name: Jet(space, space.variable(i, x0)) for i, name in enumerate(e.chart)}
    if params:
        env.update(params)
    if e.allow_p and p is not None:
        env[LAX_VARIABLE] = p
    try:
        out = evaluate(e.root, env)
    except EvaluationError as exc:
        raise exc.at(point=x0) from None
    if not isinstance(out, Jet):
        out = Jet(space, space.constant(out))
    return out


def eval_float(e: FieldExpr, x0: Sequence[float], params: Mapping[str, float] | None = None,
               p=None):
    env: dict[str, object] = {name: float(x0[i]) for i, name in enumerate(e.chart)}
    if params:
        env.update(params)
    if e.allow_p and p is not None:
        env[LAX_VARIABLE] = p
    try:
        return evaluate(e.root, env)
    except EvaluationError as exc:
        raise exc.at(point=x0) from None


def is_constant(node: Node | FieldExpr) -> bool:
    if isinstance(node, FieldExpr):
        node = node.root
    if isinstance(node, (Const, Param)):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, (Neg, Call)):
        return is_constant(node.arg)
    if isinstance(node, Pow):
        return is_constant(node.base)
    return is_constant(node.left) and is_constant(node.right)


def is_zero(e: FieldExpr) -> bool:
    return isinstance(e.root, Const) and e.root.value == 0.0


__all__ = [
    "Const", "Var", "Param", "Neg", "Call", "BinOp", "Pow", "FieldExpr",
    "parse", "to_source", "evaluate", "eval_jet", "eval_float",
]
