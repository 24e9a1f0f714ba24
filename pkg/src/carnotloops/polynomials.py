"""Exact multivariate polynomials with rational coefficients.

Small and self-contained: terms are exponent-tuple -> Fraction maps.  This is
the coefficient arithmetic behind vector-field brackets, where exactness
matters (a vanishing bracket must be the zero polynomial, not a small float).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import sympy


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, sympy.Rational):
        return Fraction(int(c.p), int(c.q))
    raise TypeError(f"coefficient {c!r} is not rational")


@dataclass(frozen=True)
class Polynomial:
    n: int
    terms: tuple  # sorted tuple of (exponents, Fraction), zero coefficients removed

    @classmethod
    def from_dict(cls, n: int, terms: dict) -> "Polynomial":
        clean = {tuple(e): _as_fraction(c) for e, c in terms.items() if c != 0}
        for e in clean:
            if len(e) != n or any(p < 0 for p in e):
                raise ValueError(f"bad exponent tuple {e} for n={n}")
        return cls(n, tuple(sorted(clean.items())))

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n, ())

    @classmethod
    def constant(cls, n: int, c) -> "Polynomial":
        return cls.from_dict(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> "Polynomial":
        """x_i, 1-indexed."""
        e = [0] * n
        e[i - 1] = 1
        return cls.from_dict(n, {tuple(e): 1})

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.terms)
        for e, c in other.terms:
            out[e] = out.get(e, Fraction(0)) + c
        return Polynomial.from_dict(self.n, out)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-1) * other

    def __neg__(self) -> "Polynomial":
        return (-1) * self

    def __rmul__(self, scalar) -> "Polynomial":
        s = _as_fraction(scalar)
        return Polynomial.from_dict(self.n, {e: s * c for e, c in self.terms})

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Polynomial.from_dict(self.n, out)

    def diff(self, i: int) -> "Polynomial":
        """Partial derivative in x_i (1-indexed)."""
        out: dict = {}
        for e, c in self.terms:
            p = e[i - 1]
            if p:
                e2 = list(e)
                e2[i - 1] = p - 1
                out[tuple(e2)] = c * p
        return Polynomial.from_dict(self.n, out)

    def eval_exact(self, point) -> Fraction:
        total = Fraction(0)
        for e, c in self.terms:
            val = c
            for x, p in zip(point, e):
                val *= Fraction(x) ** p
            total += val
        return total

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at a batch of float points, X of shape (M, n)."""
        out = np.zeros(X.shape[0])
        for e, c in self.terms:
            term = np.full(X.shape[0], float(c))
            for j, p in enumerate(e):
                if p == 1:
                    term = term * X[:, j]
                elif p > 1:
                    term = term * X[:, j] ** p
            out += term
        return out

    def to_sympy(self, symbols) -> sympy.Expr:
        expr = sympy.Integer(0)
        for e, c in self.terms:
            term = sympy.Rational(c.numerator, c.denominator)
            for s, p in zip(symbols, e):
                term *= s**p
            expr += term
        return expr

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for e, c in self.terms:
            mono = "*".join(
                f"x{j + 1}" + (f"^{p}" if p > 1 else "")
                for j, p in enumerate(e) if p
            )
            bits.append(f"{c}" if not mono else (f"{c}*{mono}" if c != 1 else mono))
        return " + ".join(bits)


def parse_polynomial(text: str, n: int) -> Polynomial:
    """Parse an expression in x1..xn with +, -, *, ^ and rational constants."""
    symbols = sympy.symbols(f"x1:{n + 1}")
    local = {f"x{i + 1}": symbols[i] for i in range(n)}
    try:
        expr = sympy.sympify(text.replace("^", "**"), locals=local, rational=True)
        poly = sympy.Poly(sympy.expand(expr), *symbols)
    except (sympy.SympifyError, sympy.PolynomialError, SyntaxError, TypeError) as exc:
        raise ValueError(f"cannot parse polynomial {text!r}: {exc}") from exc
    terms: dict = {}
    for monom, coeff in poly.terms():
        if not coeff.is_rational:
            raise ValueError(f"non-rational coefficient in {text!r}")
        terms[tuple(monom)] = Fraction(int(coeff.p), int(coeff.q))
    return Polynomial.from_dict(n, terms)
