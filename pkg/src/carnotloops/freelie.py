"""Free Lie algebra over d generators, truncated at step L.

Words are tuples of letters from {1, .., d}.  The basis is the Lyndon family
with the standard (Chen-Fox-Lyndon) factorization as bracketing.  Brackets of
basis elements are computed by expanding both sides into the free associative
algebra with integer coefficients and projecting back onto the basis; the
expansion of a Lyndon bracketing is unitriangular against lexicographic word
order, so the projection is an exact back-substitution.

Coefficient arithmetic stays exact (int / Fraction) inside this module; float
series are accepted and flow through the same code paths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from sympy import divisors, mobius

Word = tuple[int, ...]


class DimensionCapError(ValueError):
    """Requested (d, L) exceeds the configured total-dimension cap."""


def witt_dimension(d: int, j: int) -> int:
    """Number of Lyndon words of length j over d letters: (1/j) sum mu(i) d^(j/i)."""
    if d < 1 or j < 1:
        raise ValueError("need d >= 1 and j >= 1")
    total = sum(int(mobius(i)) * d ** (j // i) for i in divisors(j))
    assert total % j == 0
    return total // j


def is_lyndon(word: Word) -> bool:
    """A nonempty word is Lyndon iff it is strictly smaller than every proper suffix."""
    if not word:
        return False
    return all(word < word[i:] for i in range(1, len(word)))


def lyndon_words(d: int, max_len: int) -> list[Word]:
    """All Lyndon words over {1..d} of length <= max_len, in lexicographic order (Duval)."""
    if d < 1 or max_len < 1:
        return []
    out: list[Word] = []
    w = [1]
    while w:
        out.append(tuple(w))
        # extend periodically to max_len, then strip trailing top letters and bump
        w = [w[i % len(w)] for i in range(max_len)]
        while w and w[-1] == d:
            w.pop()
        if w:
            w[-1] += 1
    return out


def standard_factorization(word: Word) -> tuple[Word, Word]:
    """Split a Lyndon word w = uv with v its longest proper Lyndon suffix."""
    if len(word) < 2:
        raise ValueError("generators have no factorization")
    for i in range(1, len(word)):
        if is_lyndon(word[i:]):
            return word[:i], word[i:]
    raise ValueError(f"{word} is not a Lyndon word")


@dataclass(frozen=True)
class LyndonBasisElement:
    word: Word
    factorization: tuple[Word, Word] | None  # None for generators

    @property
    def level(self) -> int:
        return len(self.word)

    def bracketing(self) -> object:
        """Nested-tuple view of the standard bracketing (letters at the leaves)."""
        if self.factorization is None:
            return self.word[0]
        u, v = self.factorization
        return (_element(u).bracketing(), _element(v).bracketing())

    def __repr__(self) -> str:
        return "".join(map(str, self.word))


@lru_cache(maxsize=None)
def _element(word: Word) -> LyndonBasisElement:
    if len(word) == 1:
        return LyndonBasisElement(word, None)
    return LyndonBasisElement(word, standard_factorization(word))


DEFAULT_DIMENSION_CAP = 1000


class LyndonBasis:
    """Ordered Lyndon basis of the free Lie algebra over d letters, levels 1..L."""

    def __init__(self, d: int, L: int, max_dim: int | None = DEFAULT_DIMENSION_CAP):
        if d < 1 or L < 1:
            raise ValueError("need d >= 1 and L >= 1")
        self.d = d
        self.L = L
        self.level_dims = [witt_dimension(d, j) for j in range(1, L + 1)]
        total = sum(self.level_dims)
        if max_dim is not None and total > max_dim:
            raise DimensionCapError(
                f"dim of free step-{L} algebra over {d} letters is {total} > cap {max_dim}; "
                "pass max_dim=None to override"
            )
        words = sorted(lyndon_words(d, L), key=lambda w: (len(w), w))
        self.elements = [_element(w) for w in words]
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}
        self.by_level = {
            j: [w for w in words if len(w) == j] for j in range(1, L + 1)
        }
        for j in range(1, L + 1):
            assert len(self.by_level[j]) == self.level_dims[j - 1]

    @property
    def dim(self) -> int:
        return len(self.words)

    def __len__(self) -> int:
        return self.dim


@lru_cache(maxsize=None)
def get_basis(d: int, L: int, max_dim: int | None = DEFAULT_DIMENSION_CAP) -> LyndonBasis:
    return LyndonBasis(d, L, max_dim=max_dim)


def generate_basis(d: int, L: int,
                   max_dim: int | None = DEFAULT_DIMENSION_CAP) -> list[LyndonBasisElement]:
    """Ordered basis elements, level ascending and lexicographic within a level."""
    return list(get_basis(d, L, max_dim=max_dim).elements)


# ---------------------------------------------------------------------------
# expansion into the free associative algebra (exact integer coefficients)

def _conv(a: dict[Word, int], b: dict[Word, int]) -> dict[Word, int]:
    out: dict[Word, int] = {}
    for u, cu in a.items():
        for v, cv in b.items():
            w = u + v
            out[w] = out.get(w, 0) + cu * cv
    return out


@lru_cache(maxsize=None)
def lyndon_expansion(word: Word) -> dict[Word, int]:
    """Tensor expansion of the standard bracketing of a Lyndon word.

    Unitriangular: contains `word` with coefficient 1, all other terms are
    lexicographically larger words of the same length.
    """
    el = _element(word)
    if el.factorization is None:
        return {word: 1}
    u, v = el.factorization
    eu, ev = lyndon_expansion(u), lyndon_expansion(v)
    out = _conv(eu, ev)
    for w, c in _conv(ev, eu).items():
        out[w] = out.get(w, 0) - c
    return {w: c for w, c in out.items() if c != 0}


def project_homogeneous(level_terms: dict[Word, object], d: int, level: int):
    """Back-substitute a homogeneous degree-`level` tensor onto the Lyndon basis.

    Returns (coeffs keyed by Lyndon word, residual dict).  The residual is
    empty exactly when the input lies in the free Lie algebra (for exact
    coefficients; for floats the caller applies a tolerance).
    """
    work = dict(level_terms)
    out: dict[Word, object] = {}
    for w in get_basis(d, max(level, 1), max_dim=None).by_level.get(level, []):
        c = work.get(w)
        if c is None or c == 0:
            continue
        out[w] = c
        for u, k in lyndon_expansion(w).items():
            r = work.get(u, 0) - c * k
            if r == 0:
                work.pop(u, None)
            else:
                work[u] = r
    return out, work


# ---------------------------------------------------------------------------
# Lie series and brackets

@dataclass
class LieSeries:
    """Graded coefficient vector over the Lyndon basis, levels 1..L."""

    d: int
    L: int
    coeffs: dict[Word, object] = field(default_factory=dict)

    def __post_init__(self):
        for w in self.coeffs:
            if not (1 <= len(w) <= self.L) or not all(1 <= a <= self.d for a in w):
                raise ValueError(f"word {w} out of range for (d={self.d}, L={self.L})")

    @classmethod
    def generator(cls, d: int, L: int, i: int, coeff=1) -> "LieSeries":
        return cls(d, L, {(i,): coeff})

    @classmethod
    def zero(cls, d: int, L: int) -> "LieSeries":
        return cls(d, L, {})

    def cleaned(self, tol: float = 0.0) -> "LieSeries":
        return LieSeries(self.d, self.L,
                         {w: c for w, c in self.coeffs.items() if abs(c) > tol or (tol == 0 and c != 0)})

    def __add__(self, other: "LieSeries") -> "LieSeries":
        self._check(other)
        out = dict(self.coeffs)
        for w, c in other.coeffs.items():
            out[w] = out.get(w, 0) + c
        return LieSeries(self.d, self.L, {w: c for w, c in out.items() if c != 0})

    def __sub__(self, other: "LieSeries") -> "LieSeries":
        return self + (-1) * other

    def __neg__(self) -> "LieSeries":
        return (-1) * self

    def __rmul__(self, scalar) -> "LieSeries":
        if scalar == 0:
            return LieSeries.zero(self.d, self.L)
        return LieSeries(self.d, self.L, {w: scalar * c for w, c in self.coeffs.items()})

    def _check(self, other: "LieSeries") -> None:
        if self.d != other.d or self.L != other.L:
            raise ValueError(f"series mismatch: (d={self.d}, L={self.L}) vs (d={other.d}, L={other.L})")

    def truncated(self, L: int) -> "LieSeries":
        return LieSeries(self.d, L, {w: c for w, c in self.coeffs.items() if len(w) <= L})

    def to_floats(self) -> "LieSeries":
        return LieSeries(self.d, self.L, {w: float(c) for w, c in self.coeffs.items()})

    def to_vector(self, basis: LyndonBasis):
        import numpy as np

        v = np.zeros(basis.dim)
        for w, c in self.coeffs.items():
            v[basis.index[w]] = float(c)
        return v

    @classmethod
    def from_vector(cls, basis: LyndonBasis, vec) -> "LieSeries":
        coeffs = {w: float(vec[i]) for w, i in basis.index.items() if vec[i] != 0}
        return cls(basis.d, basis.L, coeffs)

    def max_abs(self) -> float:
        return max((abs(c) for c in self.coeffs.values()), default=0)


class StructureTable:
    """Bracket table of the truncated Lyndon basis, built lazily and cached."""

    def __init__(self, d: int, L: int):
        self.d = d
        self.L = L
        self.basis = get_basis(d, L, max_dim=None)
        self._cache: dict[tuple[Word, Word], dict[Word, int]] = {}

    def bracket_words(self, u: Word, v: Word) -> dict[Word, int]:
        """Expansion of [b_u, b_v] over the basis; empty beyond the truncation."""
        if len(u) + len(v) > self.L:
            return {}
        if u == v:
            return {}
        if (len(v), v) < (len(u), u):
            return {w: -c for w, c in self.bracket_words(v, u).items()}
        key = (u, v)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        prod = _conv(lyndon_expansion(u), lyndon_expansion(v))
        for w, c in _conv(lyndon_expansion(v), lyndon_expansion(u)).items():
            prod[w] = prod.get(w, 0) - c
        prod = {w: c for w, c in prod.items() if c != 0}
        out, residual = project_homogeneous(prod, self.d, len(u) + len(v))
        assert not residual, f"non-Lie residual in bracket expansion of {u}, {v}"
        self._cache[key] = out
        return out


@lru_cache(maxsize=None)
def get_structure_table(d: int, L: int) -> StructureTable:
    return StructureTable(d, L)


def lie_bracket(a: LieSeries, b: LieSeries) -> LieSeries:
    """[a, b], truncated at the common step L.  Bilinear over the table."""
    a._check(b)
    table = get_structure_table(a.d, a.L)
    out: dict[Word, object] = {}
    for u, cu in a.coeffs.items():
        for v, cv in b.coeffs.items():
            if len(u) + len(v) > a.L:
                continue
            scale = cu * cv
            if scale == 0:
                continue
            for w, k in table.bracket_words(u, v).items():
                out[w] = out.get(w, 0) + scale * k
    return LieSeries(a.d, a.L, {w: c for w, c in out.items() if c != 0})


def nested_bracket(d: int, L: int, word: Word) -> LieSeries:
    """Right-nested bracket [e_{i1}, [e_{i2}, ... [e_{ik-1}, e_{ik}] ...]] as a series."""
    if not word:
        raise ValueError("empty word")
    series = LieSeries.generator(d, L, word[-1])
    for letter in reversed(word[:-1]):
        series = lie_bracket(LieSeries.generator(d, L, letter), series)
    return series


# ---------------------------------------------------------------------------
# Baker-Campbell-Hausdorff via the Dynkin expansion

@lru_cache(maxsize=None)
def _dynkin_terms(L: int) -> tuple[tuple[Fraction, tuple[str, ...]], ...]:
    """Dynkin terms of log(e^a e^b) up to total weight L.

    Each term is (coefficient, letters); `letters` spells the right-nested
    bracket [l1, [l2, ... [l_{w-1}, l_w] ...]] over the symbols 'a', 'b'.
    Terms whose innermost bracket degenerates ([a,a] or [b,b]) are dropped.
    """
    terms: list[tuple[Fraction, tuple[str, ...]]] = []

    def blocks(remaining: int, seq: list[tuple[int, int]]):
        if seq:
            yield list(seq)
        if remaining == 0:
            return
        for w in range(1, remaining + 1):
            for r in range(w + 1):
                seq.append((r, w - r))
                yield from blocks(remaining - w, seq)
                seq.pop()

    for seq in blocks(L, []):
        n = len(seq)
        r_n, s_n = seq[-1]
        if s_n >= 2 or (s_n == 0 and r_n >= 2):
            continue  # innermost bracket vanishes
        weight = sum(r + s for r, s in seq)
        letters = tuple(
            itertools.chain.from_iterable(("a",) * r + ("b",) * s for r, s in seq)
        )
        denom = weight * math.prod(
            math.factorial(r) * math.factorial(s) for r, s in seq
        )
        coeff = Fraction((-1) ** (n - 1), n * denom)
        terms.append((coeff, letters))
    return tuple(terms)


def bch(a: LieSeries, b: LieSeries, L: int | None = None) -> LieSeries:
    """Truncated Baker-Campbell-Hausdorff product log(e^a e^b).

    Evaluated term by term from the Dynkin expansion with exact rational
    coefficients; each nested bracket goes through the structure table, so
    the result is computed entirely in the Lyndon basis.
    """
    a._check(b)
    if L is None:
        L = a.L
    a = a.truncated(L) if a.L != L else a
    b = b.truncated(L) if b.L != L else b
    out = LieSeries.zero(a.d, L)
    series = {"a": a, "b": b}
    for coeff, letters in _dynkin_terms(L):
        v = series[letters[-1]]
        for sym in reversed(letters[:-1]):
            v = lie_bracket(series[sym], v)
            if not v.coeffs:
                break
        if v.coeffs:
            out = out + coeff * v
    return out


# ---------------------------------------------------------------------------
# Bernoulli numbers for the differential of left translation (used by carnot)

@lru_cache(maxsize=None)
def bernoulli_number(k: int) -> Fraction:
    """Bernoulli numbers with the B_1 = -1/2 convention."""
    if k == 0:
        return Fraction(1)
    # sum_{j=0}^{m} C(m+1, j) B_j = 0
    total = Fraction(0)
    for j in range(k):
        total += math.comb(k + 1, j) * bernoulli_number(j)
    return -total / (k + 1)
