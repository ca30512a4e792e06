"""Scalar math expressions: parsing, evaluation, exact gradients and Hessians.

Grammar (UTF-8 text): decimal/scientific numbers; variables ``x0`` .. ``x{n-1}``;
binary operators ``+ - * / ^`` with standard precedence (``^`` right-associative,
binding tighter than unary minus); functions ``exp( )``, ``log( )``, ``sqrt( )``;
parentheses.  ``log`` is natural log.  Exponents of ``^`` must be constant
(variable-free); they are folded to a single constant at parse time.

Derivatives are computed by forward propagation of (value, gradient, Hessian)
triples through the tree, so they are exact to machine precision.
"""

from __future__ import annotations

import math
import re

import numpy as np

__all__ = [
    "Expression",
    "ParseError",
    "DomainError",
    "parse",
]


class ParseError(ValueError):
    """Malformed expression text; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DomainError(ValueError):
    """Evaluation outside the mathematical domain (log/sqrt/division)."""


def _is_array(v) -> bool:
    return isinstance(v, np.ndarray)


# ---------------------------------------------------------------------------
# AST nodes.  Each node evaluates against a list `xs` of per-variable values
# (floats, or equally-shaped numpy arrays for batched evaluation) and
# differentiates via `deriv`, returning (value, gradient, Hessian).
# ---------------------------------------------------------------------------


class _Node:
    __slots__ = ()

    def eval(self, xs):
        raise NotImplementedError

    def deriv(self, xs, n):
        raise NotImplementedError

    def collect_vars(self, out):
        pass

    def to_str(self) -> str:
        raise NotImplementedError

    # Precedence for printing: 1 add/sub, 2 mul/div/neg, 3 pow, 4 atom.
    PREC = 4


class Const(_Node):
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, xs):
        return self.value

    def deriv(self, xs, n):
        return self.value, np.zeros(n), np.zeros((n, n))

    def to_str(self):
        return repr(self.value)

    def __eq__(self, other):
        return isinstance(other, Const) and (
            self.value == other.value
            or (math.isnan(self.value) and math.isnan(other.value))
        )

    PREC = 4


class Var(_Node):
    __slots__ = ("index",)

    def __init__(self, index: int):
        self.index = index

    def eval(self, xs):
        return xs[self.index]

    def deriv(self, xs, n):
        g = np.zeros(n)
        g[self.index] = 1.0
        return xs[self.index], g, np.zeros((n, n))

    def collect_vars(self, out):
        out.add(self.index)

    def to_str(self):
        return f"x{self.index}"

    def __eq__(self, other):
        return isinstance(other, Var) and self.index == other.index

    PREC = 4


class _Binary(_Node):
    __slots__ = ("left", "right")

    def __init__(self, left, right):
        self.left = left
        self.right = right

    def collect_vars(self, out):
        self.left.collect_vars(out)
        self.right.collect_vars(out)

    def __eq__(self, other):
        return type(self) is type(other) and self.left == other.left and self.right == other.right


class Add(_Binary):
    __slots__ = ()
    PREC = 1
    SYMBOL = "+"

    def eval(self, xs):
        return self.left.eval(xs) + self.right.eval(xs)

    def deriv(self, xs, n):
        v1, g1, h1 = self.left.deriv(xs, n)
        v2, g2, h2 = self.right.deriv(xs, n)
        return v1 + v2, g1 + g2, h1 + h2

    def to_str(self):
        return _print_binary(self, assoc_left=True)


class Sub(_Binary):
    __slots__ = ()
    PREC = 1
    SYMBOL = "-"

    def eval(self, xs):
        return self.left.eval(xs) - self.right.eval(xs)

    def deriv(self, xs, n):
        v1, g1, h1 = self.left.deriv(xs, n)
        v2, g2, h2 = self.right.deriv(xs, n)
        return v1 - v2, g1 - g2, h1 - h2

    def to_str(self):
        return _print_binary(self, assoc_left=True)


class Mul(_Binary):
    __slots__ = ()
    PREC = 2
    SYMBOL = "*"

    def eval(self, xs):
        return self.left.eval(xs) * self.right.eval(xs)

    def deriv(self, xs, n):
        u, gu, hu = self.left.deriv(xs, n)
        v, gv, hv = self.right.deriv(xs, n)
        g = u * gv + v * gu
        h = u * hv + v * hu + np.outer(gu, gv) + np.outer(gv, gu)
        return u * v, g, h

    def to_str(self):
        return _print_binary(self, assoc_left=True)


class Div(_Binary):
    __slots__ = ()
    PREC = 2
    SYMBOL = "/"

    def eval(self, xs):
        v = self.right.eval(xs)
        if _is_array(v):
            if (v == 0).any():
                raise DomainError("division by zero")
        elif v == 0:
            raise DomainError("division by zero")
        return self.left.eval(xs) / v

    def deriv(self, xs, n):
        u, gu, hu = self.left.deriv(xs, n)
        v, gv, hv = self.right.deriv(xs, n)
        if v == 0:
            raise DomainError("division by zero")
        w = u / v
        gw = (gu - w * gv) / v
        hw = (hu - np.outer(gw, gv) - np.outer(gv, gw) - w * hv) / v
        return w, gw, hw

    def to_str(self):
        return _print_binary(self, assoc_left=True)


class Pow(_Binary):
    """Power with a constant exponent; `right` is always a Const node."""

    __slots__ = ("_int_exp",)
    PREC = 3
    SYMBOL = "^"

    def __init__(self, base, exponent: Const):
        super().__init__(base, exponent)
        c = exponent.value
        self._int_exp = int(c) if c == round(c) and abs(c) < 2**31 else None

    def eval(self, xs):
        u = self.left.eval(xs)
        c = self.right.value
        k = self._int_exp
        if k is not None:
            if k < 0:
                if _is_array(u):
                    if (u == 0).any():
                        raise DomainError("zero base with negative exponent")
                elif u == 0:
                    raise DomainError("zero base with negative exponent")
            return u ** k
        # non-integer exponent: computed as exp(c*log(u)), requires u > 0
        if _is_array(u):
            if (u <= 0).any():
                raise DomainError("non-integer power of a non-positive base")
            return np.exp(c * np.log(u))
        if u <= 0:
            raise DomainError("non-integer power of a non-positive base")
        return math.exp(c * math.log(u))

    def deriv(self, xs, n):
        u, gu, hu = self.left.deriv(xs, n)
        c = self.right.value
        k = self._int_exp
        if k is not None:
            if k == 0:
                return 1.0, np.zeros(n), np.zeros((n, n))
            if k < 0 and u == 0:
                raise DomainError("zero base with negative exponent")
            v = u ** k
            d1 = k * u ** (k - 1)
            d2 = 0.0 if k == 1 else k * (k - 1) * u ** (k - 2)
        else:
            if u <= 0:
                raise DomainError("non-integer power of a non-positive base")
            v = math.exp(c * math.log(u))
            d1 = c * v / u
            d2 = c * (c - 1.0) * v / (u * u)
        return v, d1 * gu, d1 * hu + d2 * np.outer(gu, gu)

    def to_str(self):
        base = self.left.to_str()
        if self.left.PREC < 4:
            base = f"({base})"
        expo = self.right.to_str()
        if self.right.value < 0:
            expo = f"({expo})"
        return f"{base}^{expo}"


class _Unary(_Node):
    __slots__ = ("child",)

    def __init__(self, child):
        self.child = child

    def collect_vars(self, out):
        self.child.collect_vars(out)

    def __eq__(self, other):
        return type(self) is type(other) and self.child == other.child


class Neg(_Unary):
    __slots__ = ()
    PREC = 2

    def eval(self, xs):
        return -self.child.eval(xs)

    def deriv(self, xs, n):
        v, g, h = self.child.deriv(xs, n)
        return -v, -g, -h

    def to_str(self):
        inner = self.child.to_str()
        if self.child.PREC < 3:
            inner = f"({inner})"
        return f"-{inner}"


class _Func(_Unary):
    """exp/log/sqrt: value phi(u), chain rule with phi' and phi''."""

    __slots__ = ()
    NAME = ""

    def _check(self, u):
        pass

    def _phi(self, u, m):
        raise NotImplementedError

    def _dphi(self, u):
        raise NotImplementedError

    def eval(self, xs):
        u = self.child.eval(xs)
        self._check(u)
        return self._phi(u, np if _is_array(u) else math)

    def deriv(self, xs, n):
        u, gu, hu = self.child.deriv(xs, n)
        self._check(u)
        v = self._phi(u, math)
        d1, d2 = self._dphi(u)
        return v, d1 * gu, d1 * hu + d2 * np.outer(gu, gu)

    def to_str(self):
        return f"{self.NAME}({self.child.to_str()})"


class Exp(_Func):
    __slots__ = ()
    NAME = "exp"

    def _phi(self, u, m):
        return m.exp(u)

    def _dphi(self, u):
        v = math.exp(u)
        return v, v


class Log(_Func):
    __slots__ = ()
    NAME = "log"

    def _check(self, u):
        if (u <= 0).any() if _is_array(u) else u <= 0:
            raise DomainError("log of a non-positive argument")

    def _phi(self, u, m):
        return m.log(u)

    def _dphi(self, u):
        return 1.0 / u, -1.0 / (u * u)


class Sqrt(_Func):
    __slots__ = ()
    NAME = "sqrt"

    def _check(self, u):
        if (u < 0).any() if _is_array(u) else u < 0:
            raise DomainError("sqrt of a negative argument")

    def _phi(self, u, m):
        return m.sqrt(u)

    def _dphi(self, u):
        if u == 0:
            raise DomainError("sqrt derivative at zero")
        r = math.sqrt(u)
        return 0.5 / r, -0.25 / (u * r)


def _print_binary(node, assoc_left: bool) -> str:
    left = node.left.to_str()
    if node.left.PREC < node.PREC:
        left = f"({left})"
    right = node.right.to_str()
    if node.right.PREC <= node.PREC:  # strict: keeps the tree left-associated
        right = f"({right})"
    return f"{left} {node.SYMBOL} {right}"


# ---------------------------------------------------------------------------
# Tokenizer / recursive-descent parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)

_FUNCTIONS = {"exp": Exp, "log": Log, "sqrt": Sqrt}


class _Parser:
    def __init__(self, text: str, n_vars: int):
        self.text = text
        self.n_vars = n_vars
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                # skip trailing whitespace cleanly
                if text[pos:].strip() == "":
                    break
                raise ParseError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos)
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect_op(self, symbol):
        kind, value, pos = self.next()
        if kind != "op" or value != symbol:
            raise ParseError(f"expected {symbol!r}", pos)

    def parse(self):
        node = self.expression()
        kind, value, pos = self.peek()
        if kind is not None:
            raise ParseError(f"unexpected token {value!r}", pos)
        return node

    def expression(self):
        node = self.term()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.next()
                rhs = self.term()
                node = Add(node, rhs) if value == "+" else Sub(node, rhs)
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.next()
                rhs = self.unary()
                node = Mul(node, rhs) if value == "*" else Div(node, rhs)
            else:
                return node

    def unary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.next()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            _, _, pos = self.next()
            exponent = self.unary()  # right-associative, unary minus allowed
            return Pow(base, self._fold_constant(exponent, pos))
        return base

    def _fold_constant(self, node, pos):
        used = set()
        node.collect_vars(used)
        if used:
            raise ParseError("exponent of '^' must be constant", pos)
        return Const(node.eval([]))

    def atom(self):
        kind, value, pos = self.next()
        if kind == "num":
            return Const(float(value))
        if kind == "ident":
            if value in _FUNCTIONS:
                self.expect_op("(")
                arg = self.expression()
                self.expect_op(")")
                return _FUNCTIONS[value](arg)
            m = re.fullmatch(r"x(\d+)", value)
            if m is None:
                raise ParseError(f"unknown identifier {value!r}", pos)
            index = int(m.group(1))
            if index >= self.n_vars:
                raise ParseError(
                    f"variable x{index} out of range for {self.n_vars} variable(s)", pos
                )
            return Var(index)
        if kind == "op" and value == "(":
            node = self.expression()
            self.expect_op(")")
            return node
        raise ParseError("expected a number, variable, function, or '('", pos)


# ---------------------------------------------------------------------------
# Public wrapper
# ---------------------------------------------------------------------------


class Expression:
    """Immutable scalar function of n variables, with exact derivatives.

    Evaluation is reentrant: no state is mutated, so concurrent use from
    multiple threads is safe.
    """

    def __init__(self, root: _Node, n_vars: int):
        self.root = root
        self.n_vars = n_vars

    def variables(self) -> set:
        """Indices of the variables that actually occur in the tree."""
        out: set = set()
        self.root.collect_vars(out)
        return out

    def eval(self, x) -> float:
        """Evaluate at a point (length-n sequence of scalars)."""
        return float(self.root.eval([float(v) for v in x]))

    __call__ = eval

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at many points at once; `pts` has shape (m, n)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.n_vars:
            raise ValueError(f"expected points of shape (m, {self.n_vars})")
        cols = [np.ascontiguousarray(pts[:, j]) for j in range(self.n_vars)]
        out = self.root.eval(cols)
        if not _is_array(out):  # constant expression
            out = np.full(pts.shape[0], out)
        return out

    def gradient(self, x) -> np.ndarray:
        _, g, _ = self.root.deriv([float(v) for v in x], self.n_vars)
        return g

    def hessian(self, x) -> np.ndarray:
        _, _, h = self.root.deriv([float(v) for v in x], self.n_vars)
        return h

    def value_gradient_hessian(self, x):
        """One forward pass returning (f(x), grad f(x), hess f(x))."""
        v, g, h = self.root.deriv([float(v) for v in x], self.n_vars)
        return float(v), g, h

    def scaled(self, factor: float) -> "Expression":
        """The expression multiplied by a constant factor."""
        return Expression(Mul(Const(factor), self.root), self.n_vars)

    def __str__(self) -> str:
        return self.root.to_str()

    def __repr__(self) -> str:
        return f"Expression({self.root.to_str()!r}, n_vars={self.n_vars})"

    def __eq__(self, other):
        if not isinstance(other, Expression):
            return NotImplemented
        return self.n_vars == other.n_vars and self.root == other.root


def parse(text: str, n_vars: int) -> Expression:
    """Parse expression text over variables x0..x{n_vars-1}."""
    if n_vars < 0:
        raise ValueError("n_vars must be non-negative")
    return Expression(_Parser(text, n_vars).parse(), n_vars)
