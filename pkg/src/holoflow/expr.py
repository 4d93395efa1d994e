"""Small analytic expression language for user-defined vector fields.

Grammar (``^`` binds tightest and is right-associative, unary minus sits
below it, so ``-x1^2`` is ``-(x1^2)``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'pi' | VAR | NAME | FUNC '(' expr ')' | '(' expr ')'

``VAR`` is ``x1`` .. ``xn``; any other identifier not followed by ``(`` is a
parameter name. Evaluation uses complex arithmetic, which is what continues
a real-analytic right-hand side into the complex domain.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .errors import EvaluationError, ParseError, PoleOrBranch

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt")


@dataclass(frozen=True)
class Const:
    value: float
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var:
    index: int  # 1-based
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Param:
    name: str
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    span: tuple[int, int] = field(default=(0, 0), compare=False)


Expr = Union[Const, Var, Param, Neg, BinOp, Call]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"x([0-9]+)")


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'name' | op character | 'eof'
    text: str
    span: tuple[int, int]


def _tokenize(source: str) -> list[_Token]:
    # byte offsets: precompute char index -> byte offset
    offsets = [0]
    for ch in source:
        offsets.append(offsets[-1] + len(ch.encode("utf-8")))
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            span = (offsets[pos], offsets[pos + 1])
            raise ParseError(f"unexpected character {source[pos]!r}", span)
        kind = m.lastgroup
        if kind != "ws":
            text = m.group()
            tokens.append(_Token(text if kind == "op" else kind, text,
                                 (offsets[m.start()], offsets[m.end()])))
        pos = m.end()
    tokens.append(_Token("eof", "", (offsets[-1], offsets[-1])))
    return tokens


class _Parser:
    def __init__(self, source: str, dimension: int):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.dimension = dimension

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        if self.tok.kind != kind:
            raise ParseError(f"unexpected {self._describe(self.tok)}", self.tok.span, [kind])
        return self.advance()

    @staticmethod
    def _describe(tok: _Token) -> str:
        return "end of input" if tok.kind == "eof" else f"token {tok.text!r}"

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "eof":
            raise ParseError(f"unexpected {self._describe(self.tok)}", self.tok.span,
                             ["+", "-", "*", "/", "^", "eof"])
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.advance().kind
            right = self.term()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind in ("*", "/"):
            op = self.advance().kind
            right = self.unary()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def unary(self) -> Expr:
        if self.tok.kind in ("-", "+"):
            tok = self.advance()
            operand = self.unary()
            if tok.kind == "+":
                return operand
            return Neg(operand, (tok.span[0], operand.span[1]))
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "^":
            self.advance()
            exponent = self.unary()
            return BinOp("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text), tok.span)
        if tok.kind == "(":
            self.advance()
            node = self.expr()
            close = self.expect(")")
            return _respan(node, (tok.span[0], close.span[1]))
        if tok.kind == "name":
            self.advance()
            if self.tok.kind == "(":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.text!r}", tok.span, FUNCTIONS)
                self.advance()
                arg = self.expr()
                close = self.expect(")")
                return Call(tok.text, arg, (tok.span[0], close.span[1]))
            if tok.text in FUNCTIONS:
                raise ParseError(f"function {tok.text!r} needs an argument", self.tok.span, ["("])
            m = _VAR_RE.fullmatch(tok.text)
            if m:
                k = int(m.group(1))
                if not 1 <= k <= self.dimension:
                    raise ParseError(
                        f"variable {tok.text} out of range for dimension {self.dimension}", tok.span)
                return Var(k, tok.span)
            if tok.text == "pi":
                return Const(math.pi, tok.span)
            return Param(tok.text, tok.span)
        raise ParseError(f"unexpected {self._describe(tok)}", tok.span,
                         ["number", "name", "(", "-"])


def _respan(node: Expr, span: tuple[int, int]) -> Expr:
    # parenthesised subexpression: widen the span, keep structure
    return type(node)(**{**{f: getattr(node, f) for f in node.__dataclass_fields__}, "span": span})


def parse_expression(source: str, dimension: int) -> Expr:
    """Parse ``source`` into an immutable AST over variables ``x1..x{dimension}``."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    return _Parser(source, dimension).parse()


def to_source(node: Expr) -> str:
    """Print an AST back to fully parenthesised source text."""
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi"
        if math.isinf(node.value):
            return "1e999"
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)}{node.op}{to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Expr) -> set[int]:
    """Indices of all variables referenced by ``node``."""
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return variables(node.arg)
    return set()


def parameters(node: Expr) -> set[str]:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Neg):
        return parameters(node.operand)
    if isinstance(node, BinOp):
        return parameters(node.left) | parameters(node.right)
    if isinstance(node, Call):
        return parameters(node.arg)
    return set()


def _ipow(base: complex, n: int) -> complex:
    # square-and-multiply keeps real inputs exactly real
    result = complex(1.0)
    while n:
        if n & 1:
            result *= base
        base *= base
        n >>= 1
    return result


def _power(base: complex, exponent: complex, node: BinOp) -> complex:
    if exponent.imag == 0.0 and exponent.real.is_integer() and abs(exponent.real) <= 2**31:
        n = int(exponent.real)
        if n >= 0:
            return _ipow(base, n)
        if base == 0:
            raise PoleOrBranch(f"zero raised to negative power at bytes {node.span}")
        return 1.0 / _ipow(base, -n)
    if base == 0:
        raise PoleOrBranch(f"branch point of ^ at bytes {node.span}")
    return cmath.exp(exponent * cmath.log(base))


def _call(func: str, arg: complex, node: Call) -> complex:
    if func in ("log", "sqrt") and arg == 0:
        raise PoleOrBranch(f"branch point of {func} at bytes {node.span}")
    return getattr(cmath, func)(arg)


def eval_ast(node: Expr, z: Sequence[complex], params: Mapping[str, float] | None = None) -> complex:
    """Evaluate ``node`` at the complex point ``z`` (``z[0]`` is ``x1``).

    Raises :class:`PoleOrBranch` at exact poles and branch points, and
    :class:`EvaluationError` for unbound parameters or overflow.
    """
    params = params or {}
    try:
        return _eval(node, z, params)
    except OverflowError as exc:
        raise EvaluationError(f"overflow: {exc}") from exc


def _eval(node: Expr, z, params) -> complex:
    if isinstance(node, Const):
        return complex(node.value)
    if isinstance(node, Var):
        return complex(z[node.index - 1])
    if isinstance(node, Param):
        try:
            return complex(params[node.name])
        except KeyError:
            raise EvaluationError(f"unbound parameter {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, z, params)
    if isinstance(node, BinOp):
        a = _eval(node.left, z, params)
        b = _eval(node.right, z, params)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0:
                raise PoleOrBranch(f"division by zero at bytes {node.span}")
            return a / b
        return _power(a, b, node)
    if isinstance(node, Call):
        return _call(node.func, _eval(node.arg, z, params), node)
    raise TypeError(f"not an expression node: {node!r}")
