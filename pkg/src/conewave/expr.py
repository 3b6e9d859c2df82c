"""Arithmetic expressions over the variables ``t``, ``x`` and ``u``.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = primary [ "^" unary ] ;
    primary = number | name | name "(" expr { "," expr } ")" | "(" expr ")" ;
    number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ]
            | "." digits [ exponent ] ;
    name    = "t" | "x" | "u" | "pi" | function ;

``^`` binds tighter than unary minus (``-2^2 == -4``) and is right
associative (``2^3^2 == 512``).  Functions: abs, sqrt, sin, cos, exp, log,
atan (one argument) and min, max, pow (two arguments).

Evaluation accepts floats or numpy arrays for the variables and refuses to
produce NaN or infinity: every such case raises :class:`EvaluationError`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

VARIABLES = frozenset({"t", "x", "u"})
CONSTANTS = {"pi": math.pi}
FUNCTIONS = {
    "abs": 1,
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "atan": 1,
    "min": 2,
    "max": 2,
    "pow": 2,
}


class ExprError(ValueError):
    """Base class for expression failures."""


class ExprSyntaxError(ExprError):
    def __init__(self, offset: int, expected: str, found: str):
        self.offset = offset
        self.expected = expected
        self.found = found
        super().__init__(f"syntax error at offset {offset}: expected {expected}, found {found}")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class EvaluationError(ExprError, ArithmeticError):
    pass


# --- AST -------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]


# --- tokenizer / parser ----------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op", "end"
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
        elif c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            start = i
            while i < n and source[i].isdigit():
                i += 1
            if i < n and source[i] == ".":
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            if i < n and source[i] in "eE":
                j = i + 1
                if j < n and source[j] in "+-":
                    j += 1
                if j < n and source[j].isdigit():
                    i = j
                    while i < n and source[i].isdigit():
                        i += 1
            tokens.append(_Token("num", source[start:i], start))
        elif c.isalpha() or c == "_":
            start = i
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            tokens.append(_Token("name", source[start:i], start))
        elif c in "+-*/^(),":
            tokens.append(_Token("op", c, i))
            i += 1
        else:
            raise ExprSyntaxError(_byte_offset(source, i), "a number, name, operator or parenthesis", repr(c))
    tokens.append(_Token("end", "", n))
    return tokens


def _byte_offset(source: str, char_offset: int) -> int:
    return len(source[:char_offset].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def _error(self, expected: str):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(_byte_offset(self.source, tok.offset), expected, found)

    def _accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def _expect(self, text: str):
        if not self._accept(text):
            self._error(repr(text))

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self._error("an operator or end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self._accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self._accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            value = float(tok.text)
            if not math.isfinite(value):
                self._error("a finite numeric literal")
            self.pos += 1
            return Num(value)
        if tok.kind == "name":
            self.pos += 1
            name = tok.text
            if name in VARIABLES:
                return Var(name)
            if name in CONSTANTS:
                return Num(CONSTANTS[name])
            if name in FUNCTIONS:
                self._expect("(")
                args = [self.expr()]
                while self._accept(","):
                    args.append(self.expr())
                self._expect(")")
                if len(args) != FUNCTIONS[name]:
                    raise ExprSyntaxError(
                        _byte_offset(self.source, tok.offset),
                        f"{FUNCTIONS[name]} argument(s) to {name}",
                        f"{len(args)}",
                    )
                return Call(name, tuple(args))
            raise UnknownIdentifierError(name, _byte_offset(self.source, tok.offset))
        if self._accept("("):
            node = self.expr()
            self._expect(")")
            return node
        self._error("a number, variable, function call or '('")


def parse(source: str) -> Expr:
    if not source or not source.strip():
        raise ExprSyntaxError(0, "an expression", "empty input")
    return _Parser(source).parse()


def unparse(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{unparse(e.operand)})"
    if isinstance(e, BinOp):
        return f"({unparse(e.left)} {e.op} {unparse(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(unparse(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_vars(e: Expr) -> frozenset:
    if isinstance(e, Var):
        return frozenset({e.name})
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, Neg):
        return free_vars(e.operand)
    if isinstance(e, BinOp):
        return free_vars(e.left) | free_vars(e.right)
    return frozenset().union(*(free_vars(a) for a in e.args))


def check_vars(e: Expr, allowed) -> bool:
    return free_vars(e) <= frozenset(allowed)


# --- evaluation ------------------------------------------------------------


def _fail_if(mask, message: str):
    if np.any(mask):
        raise EvaluationError(message)


def _pow(a, b):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    _fail_if((a_arr < 0) & (b_arr != np.round(b_arr)), "negative base with non-integer exponent")
    _fail_if((a_arr == 0) & (b_arr < 0), "zero raised to a negative power")
    with np.errstate(over="ignore"):
        return np.power(a_arr, b_arr)


def _eval(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, BinOp):
        a = _eval(e.left, env)
        b = _eval(e.right, env)
        if e.op == "+":
            return np.add(a, b)
        if e.op == "-":
            return np.subtract(a, b)
        if e.op == "*":
            return np.multiply(a, b)
        if e.op == "/":
            _fail_if(np.asarray(b) == 0, "division by zero")
            return np.divide(a, b)
        return _pow(a, b)
    args = [_eval(a, env) for a in e.args]
    name = e.name
    if name == "abs":
        return np.abs(args[0])
    if name == "sqrt":
        _fail_if(np.asarray(args[0]) < 0, "sqrt of a negative number")
        return np.sqrt(args[0])
    if name == "log":
        _fail_if(np.asarray(args[0]) <= 0, "log of a non-positive number")
        return np.log(args[0])
    if name == "min":
        return np.minimum(args[0], args[1])
    if name == "max":
        return np.maximum(args[0], args[1])
    if name == "pow":
        return _pow(args[0], args[1])
    with np.errstate(over="ignore"):
        return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "atan": np.arctan}[name](args[0])


def evaluate(e: Expr, **env):
    """Evaluate ``e`` with variables bound by keyword (floats or arrays).

    Returns a float when every bound value is scalar, otherwise an array
    broadcast over the inputs.
    """
    with np.errstate(all="ignore"):
        value = _eval(e, env)
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise EvaluationError("expression produced a non-finite value")
    shapes = [np.shape(v) for v in env.values()]
    target = np.broadcast_shapes(*shapes) if shapes else ()
    if target == ():
        return float(arr)
    if arr.shape != target:
        arr = np.broadcast_to(arr, np.broadcast_shapes(arr.shape, target)).copy()
    return arr


def evaluate_text(source: str, **env):
    return evaluate(parse(source), **env)
