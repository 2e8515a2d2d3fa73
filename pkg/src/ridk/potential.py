"""External-potential expressions with symbolic gradients.

A small closed grammar covers the potentials used by the experiments:
numeric literals, the coordinates x and y, sin, cos, +, -, *, /, ^ and
parentheses.  Expressions compile to an AST that evaluates on numpy arrays;
gradients are produced by symbolic differentiation, so they are exact up to
floating point arithmetic.
"""

import re

import numpy as np


class _Num:
    def __init__(self, val):
        self.val = float(val)

    def eval(self, env):
        return self.val

    def diff(self, var):
        return _Num(0.0)

    def has_var(self):
        return False


class _Var:
    def __init__(self, name):
        self.name = name

    def eval(self, env):
        return env[self.name]

    def diff(self, var):
        return _Num(1.0 if var == self.name else 0.0)

    def has_var(self):
        return True


class _Neg:
    def __init__(self, a):
        self.a = a

    def eval(self, env):
        return -self.a.eval(env)

    def diff(self, var):
        return _Neg(self.a.diff(var))

    def has_var(self):
        return self.a.has_var()


class _Bin:
    def __init__(self, op, a, b):
        self.op = op
        self.a = a
        self.b = b

    def eval(self, env):
        x, y = self.a.eval(env), self.b.eval(env)
        if self.op == "+":
            return x + y
        if self.op == "-":
            return x - y
        if self.op == "*":
            return x * y
        if self.op == "/":
            return x / y
        return x ** y

    def diff(self, var):
        da, db = self.a.diff(var), self.b.diff(var)
        if self.op == "+":
            return _Bin("+", da, db)
        if self.op == "-":
            return _Bin("-", da, db)
        if self.op == "*":
            return _Bin("+", _Bin("*", da, self.b), _Bin("*", self.a, db))
        if self.op == "/":
            num = _Bin("-", _Bin("*", da, self.b), _Bin("*", self.a, db))
            return _Bin("/", num, _Bin("*", self.b, self.b))
        # power: the parser guarantees a constant exponent
        c = self.b.eval({})
        scaled = _Bin("*", _Num(c), _Bin("^", self.a, _Num(c - 1.0)))
        return _Bin("*", scaled, da)

    def has_var(self):
        return self.a.has_var() or self.b.has_var()


class _Call:
    def __init__(self, fn, a):
        self.fn = fn
        self.a = a

    def eval(self, env):
        v = self.a.eval(env)
        return np.sin(v) if self.fn == "sin" else np.cos(v)

    def diff(self, var):
        if self.fn == "sin":
            outer = _Call("cos", self.a)
        else:
            outer = _Neg(_Call("sin", self.a))
        return _Bin("*", outer, self.a.diff(var))

    def has_var(self):
        return self.a.has_var()


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z]+)|([()+\-*/^]))")


class _Parser:
    """Recursive descent over: sum -> term -> unary -> power -> atom."""

    def __init__(self, text, names):
        self.text = text
        self.names = names
        self.tokens = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                bad = text[pos:].lstrip()
                if not bad:
                    break
                at = len(text) - len(bad)
                raise ValueError(
                    f"unexpected character {bad[0]!r} at position {at}")
            if m.lastindex is not None:
                self.tokens.append(m.group(m.lastindex))
            pos = m.end()
        self.k = 0

    def peek(self):
        return self.tokens[self.k] if self.k < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.k += 1
        return tok

    def expect(self, tok):
        got = self.take()
        if got != tok:
            raise ValueError(f"expected {tok!r}, found {got!r}")

    def parse(self):
        node = self.sum()
        if self.peek() is not None:
            raise ValueError(f"trailing input from token {self.peek()!r}")
        return node

    def sum(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            node = _Bin(self.take(), node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in ("*", "/"):
            node = _Bin(self.take(), node, self.unary())
        return node

    def unary(self):
        if self.peek() == "-":
            self.take()
            return _Neg(self.unary())
        if self.peek() == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == "^":
            self.take()
            expo = self.unary()  # right associative, allows -2
            if expo.has_var():
                raise ValueError("exponents must be numeric constants")
            return _Bin("^", base, expo)
        return base

    def atom(self):
        tok = self.take()
        if tok is None:
            raise ValueError("unexpected end of expression")
        if tok == "(":
            node = self.sum()
            self.expect(")")
            return node
        if re.fullmatch(r"\d+\.\d*|\.\d+|\d+", tok):
            return _Num(tok)
        if tok in ("sin", "cos"):
            self.expect("(")
            node = self.sum()
            self.expect(")")
            return _Call(tok, node)
        if tok in self.names:
            return _Var(tok)
        raise ValueError(f"unknown symbol {tok!r}")


class Potential:
    """Scalar potential V compiled from an expression string.

    Parameters
    ----------
    expr : str
        Expression over the coordinates (x in 1D; x, y in 2D) using the
        grammar literals, sin, cos, +, -, *, /, ^ and parentheses.
    dim : int
        Spatial dimension, 1 or 2.

    Notes
    -----
    value takes points with a trailing component axis of length dim and
    returns one value per point; grad returns the same shape as its input.
    """

    def __init__(self, expr, dim):
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        names = ("x",) if dim == 1 else ("x", "y")
        self.expression = expr
        self.dim = dim
        self._ast = _Parser(expr, names).parse()
        self._grad = [self._ast.diff(n) for n in names]

    def _env(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 0 or pts.shape[-1] != self.dim:
            raise ValueError("points need a trailing axis of length dim")
        env = {"x": pts[..., 0]}
        if self.dim == 2:
            env["y"] = pts[..., 1]
        return env

    def value(self, pts):
        """V at points of shape (..., dim), returned with shape (...)."""
        env = self._env(pts)
        return np.broadcast_to(self._ast.eval(env),
                               env["x"].shape).astype(float)

    def grad(self, pts):
        """Gradient of V at points of shape (..., dim), same shape back."""
        env = self._env(pts)
        parts = [np.broadcast_to(g.eval(env), env["x"].shape)
                 for g in self._grad]
        return np.stack(parts, axis=-1)


def parse_potential(expr, dim):
    """Compile an expression to a Potential; None for empty input.

    Parameters
    ----------
    expr : str or None
    dim : int

    Returns
    -------
    Potential or None
    """
    if expr is None or not expr.strip():
        return None
    return Potential(expr, dim)
