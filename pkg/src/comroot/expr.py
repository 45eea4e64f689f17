"""Arithmetic expressions over x1..xn, compiled to vectorised scalar fields.

Grammar (loosest to tightest binding)::

    + -        left associative
    * /        left associative
    unary -
    ^          right associative, binds tighter than unary minus

so ``-2^2 == -4`` and ``2^3^2 == 512``.  Functions take one argument:
sin, cos, exp, log, sqrt, abs.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from .errors import ArityExceeded, ExpressionSyntaxError, UnknownIdentifier
from .field import ScalarField

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

_ALIASES = {"x": 1, "y": 2, "z": 3}


# -- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


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
    arg: object


@dataclass(frozen=True)
class Expression:
    root: object
    arity: int
    text: str = ""

    def variables(self):
        return sorted(_variables(self.root))

    def __str__(self):
        return to_text(self.root)


def _variables(node):
    if isinstance(node, Var):
        return {node.index}
    if isinstance(node, Neg):
        return _variables(node.operand)
    if isinstance(node, BinOp):
        return _variables(node.left) | _variables(node.right)
    if isinstance(node, Call):
        return _variables(node.arg)
    return set()


# -- tokenizer --------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        if m.lastgroup != "ws":
            tokens.append(_Tok(m.lastgroup, m.group(), _byte_offset(text, pos)))
        pos = m.end()
    tokens.append(_Tok("end", "", _byte_offset(text, len(text))))
    return tokens


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


# -- Pratt parser ------------------------------------------------------------

_BINARY_BP = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, text, arity):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.arity = arity

    @property
    def tok(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text):
        if self.tok.text != text or self.tok.kind != "op":
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExpressionSyntaxError(f"expected {text!r}, found {found}", self.tok.offset)
        return self.advance()

    def expression(self, rbp=0):
        left = self.prefix(self.advance())
        while self.tok.kind == "op" and _BINARY_BP.get(self.tok.text, 0) > rbp:
            op = self.advance().text
            bp = _BINARY_BP[op]
            # right associativity for ^: parse the right side one notch looser
            right = self.expression(bp - 1 if op == "^" else bp)
            left = BinOp(op, left, right)
        return left

    def prefix(self, tok):
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_UNARY_BP))
        if tok.kind == "op" and tok.text == "+":
            return self.expression(_UNARY_BP)
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExpressionSyntaxError(f"unexpected {found}", tok.offset)

    def name(self, tok):
        name = tok.text
        if name in FUNCTIONS:
            self.expect("(")
            arg = self.expression()
            self.expect(")")
            return Call(name, arg)
        m = re.fullmatch(r"x([1-9][0-9]*)", name)
        if m:
            index = int(m.group(1))
        elif name in _ALIASES and self.arity <= 3:
            index = _ALIASES[name]
        else:
            raise UnknownIdentifier(f"unknown identifier {name!r} at offset {tok.offset}")
        if index > self.arity:
            raise ArityExceeded(
                f"variable {name!r} (index {index}) exceeds arity {self.arity}")
        return Var(index)


def parse(text, arity):
    """Parse ``text`` into an Expression over ``arity`` variables."""
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    if int(arity) < 1:
        raise ValueError("arity must be a positive integer")
    parser = _Parser(text, int(arity))
    root = parser.expression()
    if parser.tok.kind != "end":
        raise ExpressionSyntaxError(f"unexpected {parser.tok.text!r}", parser.tok.offset)
    return Expression(root, int(arity), text)


# -- printing ----------------------------------------------------------------

def to_text(node):
    """Fully parenthesised rendering that parses back to the same tree."""
    if isinstance(node, Expression):
        node = node.root
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation --------------------------------------------------------------

def _power(a, b):
    # negative base with a non-integer exponent has no real value
    out = np.power(a, b)
    bad = (a < 0) & (b != np.floor(b))
    return np.where(bad, np.nan, out)


_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": _power,
}


def _compile(node):
    if isinstance(node, Num):
        value = node.value
        return lambda X: np.full(X.shape[0], value)
    if isinstance(node, Var):
        j = node.index - 1
        return lambda X: X[:, j]
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda X: -inner(X)
    if isinstance(node, BinOp):
        op = _BINARY[node.op]
        left, right = _compile(node.left), _compile(node.right)
        return lambda X: op(left(X), right(X))
    if isinstance(node, Call):
        fn = FUNCTIONS[node.func]
        arg = _compile(node.arg)
        return lambda X: fn(arg(X))
    raise TypeError(f"not an expression node: {node!r}")


def to_field(e, name=None):
    """Compile an Expression into a ScalarField with positional variables."""
    return ScalarField(e.arity, _compile(e.root), name or f"expr:{e.text or to_text(e.root)}")
