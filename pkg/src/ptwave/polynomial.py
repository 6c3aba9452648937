"""Multivariate polynomials with exact differentiation, plus a small parser.

Grammar accepted by :func:`parse_polynomial`::

    expr   := term (("+" | "-") term)*
    term   := factor ("*" factor)*
    factor := ("+" | "-") factor | power
    power  := atom ("^" INT)?
    atom   := NUMBER | NAME | "(" expr ")"

``**`` is accepted as a synonym for ``^``.  Exponents must be nonnegative
integer literals.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParseError


def default_variables(n: int) -> tuple[str, ...]:
    return tuple(f"u{i + 1}" for i in range(n))


@dataclass(frozen=True)
class Polynomial:
    """Polynomial in ``nvars`` variables stored as canonical monomials.

    ``terms`` is a tuple of ``(coefficient, exponents)`` pairs sorted by
    descending total degree, then descending exponent tuple; like terms are
    merged and zero coefficients dropped.
    """

    nvars: int
    terms: tuple[tuple[float, tuple[int, ...]], ...] = ()

    @classmethod
    def from_dict(cls, nvars: int, coeffs: dict) -> "Polynomial":
        merged: dict[tuple[int, ...], float] = {}
        for exps, c in coeffs.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars:
                raise ValueError("exponent vector has wrong length")
            merged[exps] = merged.get(exps, 0.0) + float(c)
        items = [(c, e) for e, c in merged.items() if c != 0.0]
        items.sort(key=lambda t: (-sum(t[1]), tuple(-x for x in t[1])))
        return cls(nvars, tuple(items))

    @classmethod
    def constant(cls, nvars: int, value: float) -> "Polynomial":
        return cls.from_dict(nvars, {(0,) * nvars: value})

    @classmethod
    def variable(cls, nvars: int, index: int) -> "Polynomial":
        e = [0] * nvars
        e[index] = 1
        return cls.from_dict(nvars, {tuple(e): 1.0})

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {e: c for c, e in self.terms}

    @property
    def degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        d = self.as_dict()
        for e, c in other.as_dict().items():
            d[e] = d.get(e, 0.0) + c
        return Polynomial.from_dict(self.nvars, d)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.nvars, tuple((-c, e) for c, e in self.terms))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        d: dict[tuple[int, ...], float] = {}
        for c1, e1 in self.terms:
            for c2, e2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                d[e] = d.get(e, 0.0) + c1 * c2
        return Polynomial.from_dict(self.nvars, d)

    def __pow__(self, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("negative exponent")
        out = Polynomial.constant(self.nvars, 1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def derivative(self, index: int) -> "Polynomial":
        d: dict[tuple[int, ...], float] = {}
        for c, e in self.terms:
            if e[index] == 0:
                continue
            e2 = list(e)
            e2[index] -= 1
            d[tuple(e2)] = d.get(tuple(e2), 0.0) + c * e[index]
        return Polynomial.from_dict(self.nvars, d)

    def _compiled(self):
        fn = self.__dict__.get("_fn")
        if fn is None:
            parts = []
            for c, e in self.terms:
                f = [repr(c)] + [f"u[{i}]" if k == 1 else f"u[{i}]**{k}" for i, k in enumerate(e) if k]
                parts.append("*".join(f))
            body = " + ".join(parts) if parts else "0.0"
            fn = eval(f"lambda u: {body}", {})  # noqa: S307 - generated from numeric terms only
            object.__setattr__(self, "_fn", fn)
        return fn

    def __call__(self, u):
        """Evaluate at ``u`` of shape ``(nvars,)`` or ``(nvars, ...)``."""
        u = np.asarray(u)
        out = self._compiled()(u)
        if np.ndim(out) != u.ndim - 1:
            out = np.broadcast_to(out, u.shape[1:]).astype(np.result_type(u.dtype, float))
        return out

    def to_string(self, variables: Sequence[str] | None = None) -> str:
        names = tuple(variables) if variables is not None else default_variables(self.nvars)
        if not self.terms:
            return "0"
        parts = []
        for idx, (c, e) in enumerate(self.terms):
            factors = [f"{names[i]}^{k}" if k > 1 else names[i] for i, k in enumerate(e) if k]
            mag = abs(c)
            body = "*".join([repr(mag)] + factors) if (mag != 1.0 or not factors) else "*".join(factors)
            if idx == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    def __str__(self) -> str:
        return self.to_string()


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    toks = []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos:].strip()[:1]!r}", pos)
        start = m.start(m.lastgroup)
        kind = m.lastgroup
        val = m.group(kind)
        if kind == "op" and val == "**":
            val = "^"
        toks.append((kind, val, start))
        pos = m.end()
    toks.append(("end", None, len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, variables):
        self.toks = _tokenize(text)
        self.i = 0
        if isinstance(variables, dict):
            self.vars = dict(variables)
            self.nvars = max(self.vars.values()) + 1
        else:
            self.vars = {v: k for k, v in enumerate(variables)}
            self.nvars = len(variables)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, val):
        kind, v, pos = self.take()
        if v != val:
            raise ParseError(f"expected {val!r}", pos)

    def expr(self) -> Polynomial:
        out = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            out = out + rhs if op == "+" else out - rhs
        return out

    def term(self) -> Polynomial:
        out = self.factor()
        while self.peek()[1] == "*":
            self.take()
            out = out * self.factor()
        return out

    def factor(self) -> Polynomial:
        if self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            inner = self.factor()
            return inner if op == "+" else -inner
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.take()
            if kind != "num":
                raise ParseError("exponent must be a nonnegative integer literal", pos)
            if not re.fullmatch(r"\d+", val):
                raise ParseError(f"non-integer exponent {val!r}", pos)
            base = base ** int(val)
        return base

    def atom(self) -> Polynomial:
        kind, val, pos = self.take()
        if kind == "num":
            return Polynomial.constant(self.nvars, float(val))
        if kind == "name":
            if val not in self.vars:
                raise ParseError(f"unknown variable {val!r}", pos)
            return Polynomial.variable(self.nvars, self.vars[val])
        if val == "(":
            out = self.expr()
            self.expect(")")
            return out
        if kind == "end":
            raise ParseError("unexpected end of expression", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse_polynomial(text: str, variables) -> Polynomial:
    """Parse ``text`` into a canonical :class:`Polynomial`.

    ``variables`` is a sequence of names (position = variable index) or a
    mapping name -> index, which allows aliases such as ``{"v": 0, "u1": 0}``.

    Raises :class:`ParseError` (carrying the character position) on syntax
    errors, non-integer exponents and unknown variable names.
    """
    p = _Parser(text, variables)
    out = p.expr()
    kind, val, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {val!r}", pos)
    return out


@dataclass(frozen=True)
class FluxExpression:
    """Vector-valued polynomial map R^n -> R^m with exact derivatives."""

    components: tuple[Polynomial, ...]

    @property
    def nvars(self) -> int:
        return self.components[0].nvars

    def __call__(self, u):
        return np.array([p(u) for p in self.components])

    def jacobian_polys(self) -> tuple[tuple[Polynomial, ...], ...]:
        cache = self.__dict__.get("_jac")
        if cache is None:
            cache = tuple(tuple(p.derivative(k) for k in range(self.nvars)) for p in self.components)
            object.__setattr__(self, "_jac", cache)
        return cache

    def hessian_polys(self):
        cache = self.__dict__.get("_hess")
        if cache is None:
            cache = tuple(
                tuple(tuple(dp.derivative(l) for l in range(self.nvars)) for dp in row)
                for row in self.jacobian_polys()
            )
            object.__setattr__(self, "_hess", cache)
        return cache

    def jacobian(self, u):
        """Jacobian ``J[i, k] = d f_i / d u_k`` (extra axes of ``u`` trail)."""
        return np.array([[dp(u) for dp in row] for row in self.jacobian_polys()])

    def hessian(self, u):
        return np.array([[[h(u) for h in r2] for r2 in r1] for r1 in self.hessian_polys()])

    def to_strings(self, variables: Sequence[str] | None = None) -> list[str]:
        return [p.to_string(variables) for p in self.components]


def parse_flux_expression(texts: Sequence[str] | str, n: int | None = None,
                          variables: Sequence[str] | None = None) -> FluxExpression:
    """Parse one expression per flux component.

    A single string is treated as a one-component flux.  Variables default to
    ``u1..un`` with ``n = len(texts)``.
    """
    if isinstance(texts, str):
        texts = [texts]
    if variables is None:
        variables = default_variables(n if n is not None else len(texts))
    return FluxExpression(tuple(parse_polynomial(t, variables) for t in texts))
