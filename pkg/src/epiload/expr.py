"""Parsing and evaluation of the scalar expressions defining model rates.

Grammar (EBNF, ``^`` right-associative):

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := unary ("^" factor)?
    unary  := "-" unary | atom
    atom   := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

Known functions: exp, log, sin, cos, sqrt, abs, tanh (one argument) and
min, max (two or more arguments).  Known identifiers: the variables ``x``
and ``y`` and the constants ``pi`` and ``e``.  Note that per the grammar
above unary minus binds before ``^`` is consumed, so ``-x^2`` parses as
``(-x)^2``; write ``-(x^2)`` for the other reading.

Everything evaluates in plain double precision.  Parsed expressions are
immutable and evaluation is pure, so they are safe to share across
threads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    """Syntax or name error, carrying the 0-based character offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} (column {position + 1})")
        self.position = position


class EvalError(ExprError):
    """Unbound variable or numeric domain violation during evaluation."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


# Any of the node classes above.
Expression = (Num, Var, Const, Neg, BinOp, Call)

_CONSTANTS = {"pi": math.pi, "e": math.e}
_VARIABLES = ("x", "y")
_UNARY_FUNCS = ("exp", "log", "sin", "cos", "sqrt", "abs", "tanh")
_VARIADIC_FUNCS = ("min", "max")

_NUM_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


def _tokenize(text):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUM_RE.match(text, i)
        if m:
            tokens.append(("num", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(("ident", m.group(), i))
            i = m.end()
            continue
        if ch in "+-*/^(),":
            tokens.append((ch, ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind, what):
        tok = self.peek()
        if tok[0] != kind:
            raise ParseError(f"expected {what}", tok[2])
        return self.advance()

    def parse_expr(self):
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_factor()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self):
        base = self.parse_unary()
        if self.peek()[0] == "^":
            self.advance()
            return BinOp("^", base, self.parse_factor())
        return base

    def parse_unary(self):
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok[0] == "num":
            self.advance()
            return Num(float(tok[1]))
        if tok[0] == "ident":
            self.advance()
            name = tok[1]
            if self.peek()[0] == "(":
                if name not in _UNARY_FUNCS and name not in _VARIADIC_FUNCS:
                    raise ParseError(f"unknown function {name!r}", tok[2])
                self.advance()
                args = [self.parse_expr()]
                while self.peek()[0] == ",":
                    self.advance()
                    args.append(self.parse_expr())
                self.expect(")", "')'")
                if name in _UNARY_FUNCS and len(args) != 1:
                    raise ParseError(f"{name} takes exactly one argument", tok[2])
                if name in _VARIADIC_FUNCS and len(args) < 2:
                    raise ParseError(f"{name} takes at least two arguments", tok[2])
                return Call(name, tuple(args))
            if name in _VARIABLES:
                return Var(name)
            if name in _CONSTANTS:
                return Const(name)
            raise ParseError(f"unknown identifier {name!r}", tok[2])
        if tok[0] == "(":
            self.advance()
            node = self.parse_expr()
            self.expect(")", "')'")
            return node
        raise ParseError("expected a number, an identifier or '('", tok[2])


def parse(text):
    """Parse ``text`` into an expression tree, or raise ParseError."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    tok = parser.peek()
    if tok[0] != "end":
        raise ParseError("expected an operator or end of input", tok[2])
    return node


def free_variables(e):
    """Set of variable names ('x', 'y') appearing in the expression."""
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        out = frozenset()
        for a in e.args:
            out |= free_variables(a)
        return out
    return frozenset()


def evaluate(e, x=None, y=None):
    """Evaluate the expression with the given variable bindings."""
    return _eval(e, x, y)


def _eval(e, x, y):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Const):
        return _CONSTANTS[e.name]
    if isinstance(e, Var):
        val = x if e.name == "x" else y
        if val is None:
            raise EvalError(f"unbound variable {e.name!r}")
        return float(val)
    if isinstance(e, Neg):
        return -_eval(e.operand, x, y)
    if isinstance(e, BinOp):
        a = _eval(e.left, x, y)
        b = _eval(e.right, x, y)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise EvalError(f"division by zero in '{to_string(e)}'")
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError):
            raise EvalError(f"domain error in '{to_string(e)}'") from None
    args = [_eval(a, x, y) for a in e.args]
    name = e.func
    if name == "log":
        if args[0] <= 0.0:
            raise EvalError(f"log of a non-positive value in '{to_string(e)}'")
        return math.log(args[0])
    if name == "sqrt":
        if args[0] < 0.0:
            raise EvalError(f"sqrt of a negative value in '{to_string(e)}'")
        return math.sqrt(args[0])
    if name == "exp":
        try:
            return math.exp(args[0])
        except OverflowError:
            raise EvalError(f"overflow in '{to_string(e)}'") from None
    if name == "min":
        return min(args)
    if name == "max":
        return max(args)
    if name == "sin":
        return math.sin(args[0])
    if name == "cos":
        return math.cos(args[0])
    if name == "tanh":
        return math.tanh(args[0])
    return abs(args[0])


_PREC = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_NEG_PREC = 30


def _prec(e):
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    return 100


def to_string(e):
    """Render the tree to text that reparses to the identical tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        # '^' must be shielded: "-x^2" would reparse as (-x)^2.
        if _prec(e.operand) < _NEG_PREC or (
            isinstance(e.operand, BinOp) and e.operand.op == "^"
        ):
            inner = f"({inner})"
        return "-" + inner
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = to_string(e.left)
        right = to_string(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < p:
                right = f"({right})"
        else:
            if _prec(e.left) < p:
                left = f"({left})"
            # parenthesize an equal-precedence right child: float ops are
            # not associative, and '-'/'/' are not associative at all
            if _prec(e.right) <= p:
                right = f"({right})"
        return f"{left}{e.op}{right}"
    args = ",".join(to_string(a) for a in e.args)
    return f"{e.func}({args})"
