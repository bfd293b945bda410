"""Tiny arithmetic expression language for state-dependent kernel parameters.

Grammar (``^`` binds tightest and is right-associative, unary minus sits
between ``^`` and ``* /``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'x' | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

The only variable is ``x``; the only functions are ``min``, ``max`` and
``clip01``. There is no unary plus and no implicit multiplication.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifier",
    "EvalError",
    "DivisionByZero",
    "EvalOverflow",
    "DomainError",
    "parse",
    "to_source",
    "evaluate",
    "evaluate_array",
]

MAX_DEPTH = 100

FUNCTIONS = {"min": 2, "max": 2, "clip01": 1}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str = "x"


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
    func: str
    args: tuple


Expr = Union[Num, Var, Neg, BinOp, Call]


class ExprError(ValueError):
    """Base class for everything the expression language reports."""


class ExprSyntaxError(ExprError):
    """Located parse failure; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, offset: int, expected: str, found: str | None = None):
        self.offset = offset
        self.expected = expected
        self.found = found
        msg = f"at byte {offset}: expected {expected}"
        if found is not None:
            msg += f", found {found!r}"
        super().__init__(msg)


class UnknownIdentifier(ExprSyntaxError):
    def __init__(self, offset: int, name: str):
        self.name = name
        ExprError.__init__(self, f"at byte {offset}: unknown identifier {name!r}")
        self.offset = offset
        self.expected = "'x', 'min', 'max' or 'clip01'"
        self.found = name


class EvalError(ExprError):
    def __init__(self, message: str, subexpression: Expr, x=None):
        self.subexpression = subexpression
        self.x = x
        where = f" at x={x}" if x is not None else ""
        super().__init__(f"{message} in '{to_source(subexpression)}'{where}")


class DivisionByZero(EvalError):
    def __init__(self, subexpression: Expr, x=None):
        super().__init__("division by zero", subexpression, x)


class EvalOverflow(EvalError):
    def __init__(self, subexpression: Expr, x=None):
        super().__init__("non-finite result", subexpression, x)


class DomainError(EvalError):
    def __init__(self, subexpression: Expr, x=None):
        super().__init__("result outside the real domain", subexpression, x)


# --------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)

_EOF = "end of input"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.i = 0
        self.depth = 0

    def byte_offset(self, char_pos: int) -> int:
        return len(self.text[:char_pos].encode("utf-8"))

    def error(self, expected: str, tok=None):
        kind, value, pos = tok if tok is not None else self.tokens[self.i]
        found = None if kind == "eof" else value
        return ExprSyntaxError(self.byte_offset(pos), expected, found)

    def _tokenize(self, text: str):
        tokens = []
        pos = 0
        n = len(text)
        while pos < n:
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ExprSyntaxError(
                    self.byte_offset(pos), "a number, identifier or operator", text[pos]
                )
            kind = m.lastgroup
            if kind != "ws":
                tokens.append((kind, m.group(), pos))
            pos = m.end()
        tokens.append(("eof", "", n))
        return tokens

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            raise self.error(f"'{value}'")
        self.i += 1

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "eof":
            raise self.error("an operator or " + _EOF)
        return e

    def expr(self) -> Expr:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error(f"nesting depth at most {MAX_DEPTH}")
        left = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.i += 1
                left = BinOp(value, left, self.term())
            else:
                break
        self.depth -= 1
        return left

    def term(self) -> Expr:
        left = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.i += 1
                left = BinOp(value, left, self.unary())
            else:
                break
        return left

    def unary(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.i += 1
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise self.error(f"nesting depth at most {MAX_DEPTH}")
            e = Neg(self.unary())
            self.depth -= 1
            return e
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.i += 1
            self.depth += 1
            if self.depth > MAX_DEPTH:
                raise self.error(f"nesting depth at most {MAX_DEPTH}")
            e = BinOp("^", base, self.unary())
            self.depth -= 1
            return e
        return base

    def atom(self) -> Expr:
        tok = self.peek()
        kind, value, pos = tok
        if kind == "num":
            self.i += 1
            v = float(value)
            if not math.isfinite(v):
                raise self.error("a finite numeric literal", tok)
            return Num(v)
        if kind == "ident":
            self.i += 1
            if value == "x":
                return Var()
            if value not in FUNCTIONS:
                raise UnknownIdentifier(self.byte_offset(pos), value)
            self.expect("(")
            args = [self.expr()]
            for _ in range(FUNCTIONS[value] - 1):
                self.expect(",")
                args.append(self.expr())
            self.expect(")")
            return Call(value, tuple(args))
        if kind == "op" and value == "(":
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        raise self.error("an expression")


def parse(source: str | bytes) -> Expr:
    """Parse ``source`` into an expression tree.

    Raises ExprSyntaxError (or its subclass UnknownIdentifier) with a byte
    offset on any malformed input; nothing else escapes.
    """
    if isinstance(source, (bytes, bytearray)):
        try:
            source = bytes(source).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ExprSyntaxError(exc.start, "valid UTF-8") from None
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# printing

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}.get(
            e.op, _PREC_POW
        )
    if isinstance(e, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = to_source(e)
    return s if _prec(e) >= min_prec else f"({s})"


def to_source(e: Expr) -> str:
    """Print with the minimum parentheses needed to re-parse to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _PREC_NEG)
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_source(a) for a in e.args)})"
    if e.op in "+-":
        return f"{_wrap(e.left, _PREC_ADD)} {e.op} {_wrap(e.right, _PREC_MUL)}"
    if e.op in "*/":
        return f"{_wrap(e.left, _PREC_MUL)} {e.op} {_wrap(e.right, _PREC_NEG)}"
    return f"{_wrap(e.left, _PREC_ATOM)}^{_wrap(e.right, _PREC_NEG)}"


# --------------------------------------------------------------------------
# scalar evaluation


def _clip01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


def _eval(e: Expr, x: float) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return x
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, Call):
        args = [_eval(a, x) for a in e.args]
        if e.func == "clip01":
            return _clip01(args[0])
        return min(args) if e.func == "min" else max(args)
    a = _eval(e.left, x)
    b = _eval(e.right, x)
    op = e.op
    if op == "+":
        r = a + b
    elif op == "-":
        r = a - b
    elif op == "*":
        r = a * b
    elif op == "/":
        if b == 0.0:
            raise DivisionByZero(e)
        r = a / b
    else:
        try:
            r = math.pow(a, b)
        except OverflowError:
            raise EvalOverflow(e) from None
        except ValueError:
            if a == 0.0:
                raise DivisionByZero(e) from None
            raise DomainError(e) from None
    if not math.isfinite(r):
        raise EvalOverflow(e)
    return r


def evaluate(e: Expr, x: int | float) -> float:
    """Evaluate ``e`` at state ``x`` in IEEE double precision."""
    try:
        return _eval(e, float(x))
    except EvalError as exc:
        if exc.x is None:
            exc.x = x
            exc.args = (f"{exc.args[0]} at x={x}",)
        raise


# --------------------------------------------------------------------------
# vectorised evaluation (same arithmetic, elementwise)


def _first_bad(xs: np.ndarray, mask: np.ndarray):
    idx = np.flatnonzero(mask)
    return None if idx.size == 0 else xs.flat[idx[0]]


def _eval_array(e: Expr, xs: np.ndarray) -> np.ndarray:
    if isinstance(e, Num):
        return np.full(xs.shape, e.value)
    if isinstance(e, Var):
        return xs
    if isinstance(e, Neg):
        return -_eval_array(e.operand, xs)
    if isinstance(e, Call):
        args = [_eval_array(a, xs) for a in e.args]
        if e.func == "clip01":
            return np.minimum(np.maximum(args[0], 0.0), 1.0)
        return np.minimum(*args) if e.func == "min" else np.maximum(*args)
    a = _eval_array(e.left, xs)
    b = _eval_array(e.right, xs)
    op = e.op
    if op == "/":
        zero = b == 0.0
        if zero.any():
            raise DivisionByZero(e, _first_bad(xs, zero))
    with np.errstate(all="ignore"):
        if op == "+":
            r = a + b
        elif op == "-":
            r = a - b
        elif op == "*":
            r = a * b
        elif op == "/":
            r = a / b
        else:
            r = np.power(a, b)
            bad = np.isnan(r)
            if bad.any():
                zero = bad & (a == 0.0)
                if zero.any():
                    raise DivisionByZero(e, _first_bad(xs, zero))
                raise DomainError(e, _first_bad(xs, bad))
            pole = np.isinf(r) & (a == 0.0)
            if pole.any():
                raise DivisionByZero(e, _first_bad(xs, pole))
    nonfinite = ~np.isfinite(r)
    if nonfinite.any():
        raise EvalOverflow(e, _first_bad(xs, nonfinite))
    return r


def evaluate_array(e: Expr, xs) -> np.ndarray:
    """Evaluate ``e`` at every state in ``xs``; raises on the first bad state."""
    xs = np.asarray(xs, dtype=np.float64)
    return np.array(_eval_array(e, xs), dtype=np.float64, copy=True)
