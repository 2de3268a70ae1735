"""Closed-form complex functions of ``z``: parser, printer and jet evaluation.

Grammar (EBNF)::

    expr   = term , { ("+" | "-") , term } ;
    term   = unary , { ("*" | "/") , unary } ;
    unary  = ("-" | "+") , unary | power ;
    power  = atom , [ "^" , unary ] ;
    atom   = number | "z" | "i" | "pi" | "e"
           | func , "(" , expr , ")" | "(" , expr , ")" ;
    func   = "exp" | "log" | "sin" | "cos" | "tan" | "sinh" | "cosh" | "sqrt" ;
    number = digits , [ "." , digits ] , [ ("e" | "E") , [sign] , digits ] , [ "i" | "j" ] ;

``^`` binds tighter than unary minus (``-z^2`` is ``-(z^2)``) and is right
associative (``2^3^2`` is ``2^(3^2)``).  A number with an ``i``/``j`` suffix
is an imaginary literal.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from . import jet as J
from .errors import DomainError, ParseError, UnknownIdentifierError
from .jet import Jet

CONSTANTS = {"i": 1j, "pi": math.pi, "e": math.e}
FUNCTION_NAMES = tuple(J.FUNCTIONS)
BINARY_OPS = ("+", "-", "*", "/", "^")


# -- syntax tree ----------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    pass


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
    arg: "Expr"


Expr = Union[Num, Const, Var, Neg, BinOp, Call]


# -- tokenizer --------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # 'num', 'imag', 'ident', 'op', 'end'
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    i, n = 0, len(source)
    boff = lambda k: len(source[:k].encode("utf-8"))  # noqa: E731
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        start = i
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
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
            kind = "num"
            if i < n and source[i] in "ij" and not (i + 1 < n and (source[i + 1].isalnum() or source[i + 1] == "_")):
                kind = "imag"
                toks.append(_Tok(kind, source[start:i], boff(start)))
                i += 1
                continue
            toks.append(_Tok(kind, source[start:i], boff(start)))
        elif ch.isalpha() or ch == "_":
            while i < n and (source[i].isalnum() or source[i] == "_"):
                i += 1
            toks.append(_Tok("ident", source[start:i], boff(start)))
        elif ch in "+-*/^()":
            toks.append(_Tok("op", ch, boff(start)))
            i += 1
        else:
            raise ParseError(f"unexpected character {ch!r}", boff(start))
    toks.append(_Tok("end", "", boff(n)))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.pos = 0

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def take(self) -> _Tok:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str):
        tok = self.peek()
        if tok.kind == "end":
            raise ParseError(f"unexpected end of input, expected {text!r}", tok.offset)
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.offset)
        self.pos += 1

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r}", tok.offset)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            return Neg(self.unary())
        if tok.kind == "op" and tok.text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "imag":
            return Num(complex(0.0, float(tok.text)))
        if tok.kind == "ident":
            name = tok.text
            if name in FUNCTION_NAMES:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if self.peek().kind == "op" and self.peek().text == "(":
                raise UnknownIdentifierError(f"unknown function {name!r}", tok.offset)
            if name == "z":
                return Var()
            if name in CONSTANTS:
                return Const(name)
            raise UnknownIdentifierError(f"unknown identifier {name!r}", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "end":
            raise ParseError("unexpected end of input", tok.offset)
        raise ParseError(f"unexpected {tok.text!r}", tok.offset)


def parse(source: str) -> Expr:
    """Parse ``source`` into an expression tree.

    Raises
    ------
    ParseError
        On malformed input; ``err.offset`` is the byte offset of the problem.
    UnknownIdentifierError
        For names other than ``z``, the constants and the built-in functions.
    """
    if not source or not source.strip():
        raise ParseError("empty expression", 0)
    return _Parser(source).parse()


# -- printing ---------------------------------------------------------------

def _num_source(v: complex) -> str:
    if v.imag == 0 and v.real >= 0 and math.isfinite(v.real):
        return repr(v.real)
    if v.real == 0 and v.imag >= 0 and math.isfinite(v.imag):
        return repr(v.imag) + "i"
    return f"({v.real!r} + {v.imag!r}i)"


def to_source(node: Expr) -> str:
    """Serialize a tree; ``parse(to_source(t)) == t`` for every parsed tree."""
    if isinstance(node, Num):
        return _num_source(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return "z"
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


# -- evaluation -----------------------------------------------------------

def _constant_value(node: Expr):
    """Value of a z-free subtree, else None."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return complex(CONSTANTS[node.name])
    if isinstance(node, Neg):
        v = _constant_value(node.operand)
        return None if v is None else -v
    if isinstance(node, BinOp):
        a, b = _constant_value(node.left), _constant_value(node.right)
        if a is None or b is None:
            return None
        try:
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                return a / b
            return a**b
        except (ZeroDivisionError, OverflowError):
            return None
    if isinstance(node, Call):
        a = _constant_value(node.arg)
        if a is None:
            return None
        j = eval_jet(node, 0.0, 0)  # exercises the same domain checks
        return complex(j.d0)
    return None


def _integer_exponent(c) -> int | None:
    if c is None or c.imag != 0 or not float(c.real).is_integer() or abs(c.real) > 64:
        return None
    return int(c.real)


@lru_cache(maxsize=512)
def _compile(node: Expr) -> Callable[[Jet], Jet]:
    if isinstance(node, Var):
        return lambda zj: zj
    const = _constant_value(node) if not isinstance(node, Call) else None
    if isinstance(node, (Num, Const)) or const is not None:
        value = node.value if isinstance(node, Num) else (
            complex(CONSTANTS[node.name]) if isinstance(node, Const) else const)
        return lambda zj: Jet.constant(value, zj.order, like=zj.m[0])
    if isinstance(node, Neg):
        inner = _compile(node.operand)
        return lambda zj: -inner(zj)
    if isinstance(node, Call):
        inner = _compile(node.arg)
        fn = J.FUNCTIONS[node.func]
        return lambda zj: fn(inner(zj))
    if isinstance(node, BinOp):
        left = _compile(node.left)
        if node.op == "^":
            c = _constant_value(node.right)
            k = _integer_exponent(c)
            if k is not None:
                return lambda zj: left(zj).ipow(k)
            if c is not None:
                return lambda zj: J.cpow(left(zj), c)
            right = _compile(node.right)
            # w^u = exp(u log w) for a non-constant exponent
            return lambda zj: J.exp(right(zj) * J.log(left(zj)))
        right = _compile(node.right)
        if node.op == "+":
            return lambda zj: left(zj) + right(zj)
        if node.op == "-":
            return lambda zj: left(zj) - right(zj)
        if node.op == "*":
            return lambda zj: left(zj) * right(zj)
        return lambda zj: left(zj) / right(zj)
    raise TypeError(f"not an expression node: {node!r}")


def _on_cut(w: complex) -> bool:
    return w.imag == 0 and w.real <= 0


def _checked(fn):
    def g(w):
        if _on_cut(w):
            raise DomainError("argument on the branch cut", w)
        return fn(w)
    return g


def _scalar_tan(w):
    c = cmath.cos(w)
    if c == 0:
        raise DomainError("pole of tan", w)
    return cmath.sin(w) / c


_SCALAR_FUNCTIONS = {
    "exp": cmath.exp, "log": _checked(cmath.log), "sqrt": _checked(cmath.sqrt),
    "sin": cmath.sin, "cos": cmath.cos, "tan": _scalar_tan,
    "sinh": cmath.sinh, "cosh": cmath.cosh,
}


@lru_cache(maxsize=512)
def _compile_scalar(node: Expr) -> Callable[[complex], complex]:
    """Plain-value evaluator on Python complex numbers (no derivatives, no scaling)."""
    if isinstance(node, Var):
        return lambda z: z
    const = _constant_value(node) if not isinstance(node, Call) else None
    if isinstance(node, (Num, Const)) or const is not None:
        value = node.value if isinstance(node, Num) else (
            complex(CONSTANTS[node.name]) if isinstance(node, Const) else const)
        return lambda z: value
    if isinstance(node, Neg):
        inner = _compile_scalar(node.operand)
        return lambda z: -inner(z)
    if isinstance(node, Call):
        inner = _compile_scalar(node.arg)
        fn = _SCALAR_FUNCTIONS[node.func]
        return lambda z: fn(inner(z))
    if isinstance(node, BinOp):
        left = _compile_scalar(node.left)
        if node.op == "^":
            c = _constant_value(node.right)
            k = _integer_exponent(c)
            if k is not None:
                return lambda z: left(z) ** k
            log = _SCALAR_FUNCTIONS["log"]
            if c is not None:
                return lambda z: cmath.exp(c * log(left(z)))
            right = _compile_scalar(node.right)
            return lambda z: cmath.exp(right(z) * log(left(z)))
        right = _compile_scalar(node.right)
        if node.op == "+":
            return lambda z: left(z) + right(z)
        if node.op == "-":
            return lambda z: left(z) - right(z)
        if node.op == "*":
            return lambda z: left(z) * right(z)
        return lambda z: left(z) / right(z)
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet(f: Expr, z, order: int = 3) -> Jet:
    """Derivatives of ``f`` at ``z`` (scalar or array) up to ``order``.

    Raises
    ------
    DomainError
        At a pole, on the principal branch cut of ``log``/``sqrt``/non-integer
        powers, or when an intermediate value leaves the floating point range.
    """
    if not 0 <= order <= 3:
        raise ValueError("order must be in 0..3")
    if isinstance(f, str):
        f = parse(f)
    zj = Jet.variable(z, order)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        try:
            out = _compile(f)(zj)
        except DomainError as exc:
            if exc.point is None and np.ndim(z) == 0:
                raise DomainError(str(exc), z) from None
            raise
        except (OverflowError, ZeroDivisionError) as exc:
            raise DomainError(str(exc), z if np.ndim(z) == 0 else None) from None
    bad = ~(np.isfinite(out.m[0]) & np.isfinite(out.lsc))
    if np.any(bad):
        where = z if np.ndim(z) == 0 else np.ravel(np.broadcast_to(z, bad.shape))[np.ravel(bad)][0]
        raise DomainError("non-finite value", where)
    return out


# -- polynomial recognition ---------------------------------------------------

def polynomial_coeffs(node: Expr) -> list[complex] | None:
    """Ascending coefficients if ``node`` is a polynomial in ``z``, else None."""
    c = _constant_value(node) if not isinstance(node, Var) else None
    if c is not None:
        return [c]
    if isinstance(node, Var):
        return [0j, 1 + 0j]
    if isinstance(node, Neg):
        p = polynomial_coeffs(node.operand)
        return None if p is None else [-a for a in p]
    if isinstance(node, BinOp):
        p = polynomial_coeffs(node.left)
        if p is None:
            return None
        if node.op == "^":
            k = _integer_exponent(_constant_value(node.right))
            if k is None or k < 0:
                return None
            out = [1 + 0j]
            for _ in range(k):
                out = _polymul(out, p)
            return _trim(out)
        if node.op == "/":
            d = _constant_value(node.right)
            if d is None or d == 0:
                return None
            return [a / d for a in p]
        q = polynomial_coeffs(node.right)
        if q is None:
            return None
        if node.op == "*":
            return _trim(_polymul(p, q))
        n = max(len(p), len(q))
        p = p + [0j] * (n - len(p))
        q = q + [0j] * (n - len(q))
        sign = 1 if node.op == "+" else -1
        return _trim([a + sign * b for a, b in zip(p, q)])
    return None


def _polymul(p, q):
    out = [0j] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _trim(p):
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


# -- evaluable functions ----------------------------------------------------

class Function:
    """Anything that can produce jets at points of the plane.

    Subclasses implement :meth:`jet`; everything else derives from it.
    """

    name = "f"

    def jet(self, z, order: int = 3) -> Jet:
        raise NotImplementedError

    def __call__(self, z):
        return self.jet(z, 0).d0

    def scalar(self, z: complex) -> complex:
        """Value at a single point as a Python complex (fast path for ODE right-hand sides)."""
        return complex(self.jet(z, 0).d0)

    def derivative_values(self, z):
        """``(f(z), f'(z))`` as plain values."""
        j = self.jet(z, 1)
        return j.d0, j.d1

    def logderiv(self, z):
        return self.jet(z, 1).ratio(1)

    def log_abs(self, z):
        return self.jet(z, 0).log_abs()

    @property
    def polynomial(self) -> list[complex] | None:
        return None

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class ExprFunction(Function):
    """A :class:`Function` backed by a parsed expression."""

    def __init__(self, expr: Expr | str):
        self.expr = parse(expr) if isinstance(expr, str) else expr
        self.name = to_source(self.expr) if not isinstance(expr, str) else expr

    def jet(self, z, order: int = 3) -> Jet:
        return eval_jet(self.expr, z, order)

    def scalar(self, z: complex) -> complex:
        try:
            v = _compile_scalar(self.expr)(complex(z))
        except (OverflowError, ZeroDivisionError, ValueError):
            v = complex("nan")
        if v != v or abs(v) == math.inf:
            # let the jet route produce a scaled value or a located domain error
            return complex(self.jet(z, 0).d0)
        return v

    @property
    def polynomial(self):
        return polynomial_coeffs(self.expr)


class NativeFunction(Function):
    """A :class:`Function` from a Python callable ``jet_fn(z, order) -> Jet``."""

    def __init__(self, jet_fn: Callable[[object, int], Jet], name: str = "native", max_order: int = 3):
        self._jet_fn = jet_fn
        self.name = name
        self.max_order = max_order

    def jet(self, z, order: int = 3) -> Jet:
        if order > self.max_order:
            raise ValueError(f"{self.name} provides jets up to order {self.max_order}")
        return self._jet_fn(z, order)


class ConstantFunction(Function):
    def __init__(self, value):
        self.value = complex(value)
        self.name = repr(self.value)

    def jet(self, z, order: int = 3) -> Jet:
        return Jet.constant(self.value, order, like=np.asarray(z, dtype=complex))

    def scalar(self, z):
        return self.value

    @property
    def polynomial(self):
        return [self.value]


def as_function(obj) -> Function:
    """Coerce a string, tree, number or ``Function`` into a ``Function``."""
    if isinstance(obj, Function):
        return obj
    if isinstance(obj, str):
        return ExprFunction(obj)
    if isinstance(obj, (Num, Const, Var, Neg, BinOp, Call)):
        return ExprFunction(obj)
    if isinstance(obj, (int, float, complex)):
        return ConstantFunction(obj)
    if callable(obj):
        def value_only(z, order):
            if order != 0:
                raise ValueError("plain callables provide values only")
            return Jet((np.asarray(obj(z), dtype=complex),))
        return NativeFunction(value_only, getattr(obj, "__name__", "callable"), max_order=0)
    raise TypeError(f"cannot evaluate {obj!r}")
