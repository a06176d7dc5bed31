"""A small arithmetic language for sources ``g(t, x)`` in config files.

Grammar (``^`` binds tightest and is right-associative)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Names are ``x``, ``y``, ``t``, ``d`` (boundary distance) and ``pi``;
functions are ``exp``, ``sin`` and ``cos``. Evaluation is vectorized over
the nodes.
"""

from __future__ import annotations

import re

import numpy as np

FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
VARIABLES = ("x", "y", "t", "d")
CONSTANTS = {"pi": np.pi}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")


class ExpressionError(ValueError):
    pass


def _tokenize(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ExpressionError(f"cannot tokenize {text[pos:]!r}")
        num, name, op = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        elif op in "+-*/^()":
            out.append(("op", op))
        else:
            raise ExpressionError(f"unexpected character {op!r} at offset {m.start(3)}")
        pos = m.end()
    out.append(("end", None))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.take()
        if tok != ("op", op):
            raise ExpressionError(f"expected {op!r}, got {tok[1]!r}")

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ExpressionError(f"trailing input at {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return ("neg", self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return ("call", val, arg)
            if val in VARIABLES:
                return ("var", val)
            if val in CONSTANTS:
                return ("num", CONSTANTS[val])
            raise ExpressionError(f"unknown name {val!r}")
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {val!r}")


def _eval(node, env):
    kind = node[0]
    if kind == "num":
        return node[1]
    if kind == "var":
        return env[node[1]]
    if kind == "neg":
        return -_eval(node[1], env)
    if kind == "call":
        return FUNCTIONS[node[1]](_eval(node[2], env))
    a, b = _eval(node[1], env), _eval(node[2], env)
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "/":
        return a / b
    return np.power(a, b)


def _variables(node, acc):
    if node[0] == "var":
        acc.add(node[1])
    for child in node[1:]:
        if isinstance(child, tuple):
            _variables(child, acc)
    return acc


class Expression:
    """Parsed expression; call with ``(t, nodes, d)``."""

    def __init__(self, text: str):
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError("expression must be a non-empty string")
        self.text = text
        self.tree = _Parser(text).parse()
        self.variables = frozenset(_variables(self.tree, set()))

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __call__(self, t, nodes, d) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=float)
        n = nodes.shape[0]
        env = {"t": float(t), "x": nodes[:, 0], "d": np.asarray(d, dtype=float)}
        if "y" in self.variables:
            if nodes.shape[1] < 2:
                raise ExpressionError("y is not defined on a 1D grid")
            env["y"] = nodes[:, 1]
        with np.errstate(all="ignore"):
            val = np.broadcast_to(np.asarray(_eval(self.tree, env), dtype=float), (n,)).copy()
        if not np.all(np.isfinite(val)):
            raise ExpressionError(f"{self.text!r} is not finite at t={t}")
        return val


def parse(text: str) -> Expression:
    return Expression(text)
