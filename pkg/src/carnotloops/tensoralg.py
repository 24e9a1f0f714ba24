"""Truncated tensor algebra over R^d: signatures, Chen products, exp/log,
projection onto the free Lie algebra, and the explicit Chen-Strichartz
coefficients for piecewise-linear paths.

Level-k coefficients are stored as flat float arrays of length d^k; the entry
for a word (i1, .., ik) sits at the base-d index sum (i_j - 1) d^(k-j).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .freelie import (
    LieSeries,
    get_basis,
    is_lyndon,
    lyndon_expansion,
    nested_bracket,
)
from .paths import PiecewiseLinearPath

STRICHARTZ_LEVEL_CAP = 4


class PrimitivityError(ValueError):
    """Input of project_to_lie is not the logarithm of a group-like series."""


def word_index(word: tuple[int, ...], d: int) -> int:
    idx = 0
    for a in word:
        idx = idx * d + (a - 1)
    return idx


def index_word(idx: int, d: int, k: int) -> tuple[int, ...]:
    letters = []
    for _ in range(k):
        letters.append(idx % d + 1)
        idx //= d
    return tuple(reversed(letters))


@dataclass
class TensorSeries:
    """Graded coefficient arrays, levels 0..L (level 0 is a scalar)."""

    d: int
    L: int
    levels: list  # levels[k] is a flat ndarray of length d**k; levels[0] scalar

    def __post_init__(self):
        if len(self.levels) != self.L + 1:
            raise ValueError("need exactly L+1 levels")
        self.levels = [float(self.levels[0])] + [
            np.asarray(lvl, dtype=float).reshape(self.d**k)
            for k, lvl in enumerate(self.levels[1:], start=1)
        ]

    def copy(self) -> "TensorSeries":
        return TensorSeries(self.d, self.L, [self.levels[0]] + [l.copy() for l in self.levels[1:]])

    def get(self, word: tuple[int, ...]) -> float:
        if not word:
            return float(self.levels[0])
        return float(self.levels[len(word)][word_index(word, self.d)])

    def _check(self, other: "TensorSeries") -> None:
        if self.d != other.d or self.L != other.L:
            raise ValueError(
                f"tensor series mismatch: (d={self.d}, L={self.L}) vs (d={other.d}, L={other.L})"
            )

    def __add__(self, other: "TensorSeries") -> "TensorSeries":
        self._check(other)
        return TensorSeries(
            self.d, self.L,
            [self.levels[0] + other.levels[0]]
            + [a + b for a, b in zip(self.levels[1:], other.levels[1:])],
        )

    def __sub__(self, other: "TensorSeries") -> "TensorSeries":
        return self + (-1.0) * other

    def __rmul__(self, scalar: float) -> "TensorSeries":
        return TensorSeries(
            self.d, self.L,
            [scalar * self.levels[0]] + [scalar * l for l in self.levels[1:]],
        )

    def max_abs_diff(self, other: "TensorSeries") -> float:
        self._check(other)
        out = abs(self.levels[0] - other.levels[0])
        for a, b in zip(self.levels[1:], other.levels[1:]):
            if len(a):
                out = max(out, float(np.max(np.abs(a - b))))
        return out


def identity_series(d: int, L: int) -> TensorSeries:
    return TensorSeries(d, L, [1.0] + [np.zeros(d**k) for k in range(1, L + 1)])


def segment_signature(dx, L: int) -> TensorSeries:
    """Signature of one linear segment: level k is dx^(tensor k) / k!."""
    dx = np.asarray(dx, dtype=float).ravel()
    d = len(dx)
    levels = [1.0]
    cur = np.ones(1)
    for k in range(1, L + 1):
        cur = np.kron(cur, dx) / k
        levels.append(cur)
    return TensorSeries(d, L, levels)


def chen_concat(s1: TensorSeries, s2: TensorSeries) -> TensorSeries:
    """Truncated tensor product; Chen's identity makes this path concatenation."""
    s1._check(s2)
    d, L = s1.d, s1.L
    levels = [s1.levels[0] * s2.levels[0]]
    for k in range(1, L + 1):
        acc = np.zeros(d**k)
        for i in range(k + 1):
            a = s1.levels[i] if i else s1.levels[0]
            b = s2.levels[k - i] if k - i else s2.levels[0]
            if i == 0:
                acc += a * b
            elif i == k:
                acc += a * (b if np.ndim(b) == 0 else float(b))
            else:
                acc += np.kron(a, b)
        levels.append(acc)
    return TensorSeries(d, L, levels)


def tensor_power_accumulate(x: TensorSeries, coeffs: list[float]) -> TensorSeries:
    """sum_k coeffs[k] * x^k for a series x with zero scalar part (nilpotent)."""
    out = coeffs[0] * identity_series(x.d, x.L)
    power = identity_series(x.d, x.L)
    for k in range(1, len(coeffs)):
        power = chen_concat(power, x)
        out = out + coeffs[k] * power
    return out


def exp_series(x: TensorSeries) -> TensorSeries:
    if abs(x.levels[0]) > 1e-14:
        raise ValueError("tensor exponential expects zero scalar part")
    x = x.copy()
    x.levels[0] = 0.0
    return tensor_power_accumulate(x, [1.0 / math.factorial(k) for k in range(x.L + 1)])


def log_series(s: TensorSeries) -> TensorSeries:
    """Truncated tensor logarithm; requires scalar part exactly 1."""
    if abs(s.levels[0] - 1.0) > 1e-12:
        raise ValueError(f"log of a series with scalar part {s.levels[0]!r}")
    x = s.copy()
    x.levels[0] = 0.0
    coeffs = [0.0] + [(-1.0) ** (k + 1) / k for k in range(1, s.L + 1)]
    return tensor_power_accumulate(x, coeffs)


def path_signature(path: PiecewiseLinearPath, L: int) -> TensorSeries:
    """Signature of a piecewise-linear path: Chen fold of segment signatures."""
    sig = identity_series(path.d, L)
    for dx in path.increments():
        sig = chen_concat(sig, segment_signature(dx, L))
    return sig


@lru_cache(maxsize=None)
def _expansion_arrays(d: int, L: int):
    """Per level: list of (lyndon word, index array, coefficient array) in lex order."""
    basis = get_basis(d, L, max_dim=None)
    out = {}
    for level in range(1, L + 1):
        rows = []
        for w in basis.by_level[level]:
            exp = lyndon_expansion(w)
            idx = np.array([word_index(u, d) for u in exp], dtype=np.intp)
            val = np.array([float(c) for c in exp.values()])
            rows.append((w, idx, val))
        out[level] = rows
    return out


def project_to_lie(log_sig: TensorSeries, tol: float = 1e-9) -> LieSeries:
    """Lyndon coordinates of a Lie element given in tensor coordinates.

    Back-substitution against the unitriangular Lyndon expansions, level by
    level.  A residual above `tol` (relative to the level's largest entry)
    means the input was not the logarithm of a group-like series.
    """
    d, L = log_sig.d, log_sig.L
    if abs(log_sig.levels[0]) > tol:
        raise PrimitivityError("nonzero scalar part")
    arrays = _expansion_arrays(d, L)
    coeffs: dict[tuple[int, ...], float] = {}
    for level in range(1, L + 1):
        work = log_sig.levels[level].copy()
        scale = max(1.0, float(np.max(np.abs(work))) if len(work) else 1.0)
        for w, idx, val in arrays[level]:
            c = float(work[word_index(w, d)])
            if c != 0.0:
                coeffs[w] = c
                work[idx] -= c * val
        residual = float(np.max(np.abs(work))) if len(work) else 0.0
        if residual > tol * scale:
            raise PrimitivityError(
                f"level-{level} residual {residual:.3e} exceeds tolerance; input is not primitive"
            )
    return LieSeries(d, L, {w: c for w, c in coeffs.items() if c != 0.0})


def lie_to_tensor(series: LieSeries) -> TensorSeries:
    """Expand a Lie series back into tensor coordinates."""
    out = identity_series(series.d, series.L)
    out.levels[0] = 0.0
    for w, c in series.coeffs.items():
        lvl = out.levels[len(w)]
        for u, k in lyndon_expansion(w).items():
            lvl[word_index(u, series.d)] += float(c) * k
    return out


def log_signature(path: PiecewiseLinearPath, L: int, tol: float = 1e-9) -> LieSeries:
    """Lyndon-coordinate log-signature of a piecewise-linear path."""
    return project_to_lie(log_series(path_signature(path, L)), tol=tol)


# ---------------------------------------------------------------------------
# exact iterated integrals and the Chen-Strichartz permutation sums

def iterated_integral(path: PiecewiseLinearPath, word: tuple[int, ...]) -> float:
    """Exact iterated Stratonovich integral of a PL path over the given word.

    Within each segment every prefix integral is a polynomial in time, so the
    recursion F_j' = F_{j-1} * slope_j integrates in closed form.
    """
    k = len(word)
    if k == 0:
        return 1.0
    if max(word) > path.d or min(word) < 1:
        raise ValueError(f"word {word} out of range for d={path.d}")
    values = np.zeros(k + 1)
    values[0] = 1.0
    dts = np.diff(path.times)
    for seg, dx in enumerate(path.increments()):
        dt = dts[seg]
        slopes = dx / dt
        # poly[j]: coefficients (ascending powers of u = t - t_seg) of prefix j
        poly = [np.array([1.0])]
        for j in range(1, k + 1):
            prev = poly[j - 1]
            integ = np.concatenate([[values[j]], prev * slopes[word[j - 1] - 1] / np.arange(1, len(prev) + 1)])
            poly.append(integ)
        powers = dt ** np.arange(k + 1)
        for j in range(1, k + 1):
            values[j] = np.dot(poly[j], powers[: len(poly[j])])
    return float(values[k])


def _descents(perm: tuple[int, ...]) -> int:
    return sum(1 for a, b in zip(perm, perm[1:]) if a > b)


def strichartz_lambda_raw(path: PiecewiseLinearPath, word: tuple[int, ...],
                          _integrals: dict | None = None) -> float:
    """Face-value permutation sum attached to one word of the Chen-Strichartz
    development:

        sum_sigma (-1)^e(sigma) / (k^2 binom(k-1, e(sigma))) * I(sigma^-1 word)

    where e counts descents of sigma and I is the iterated integral of the
    letter sequence j -> word[sigma^-1(j)].  These coefficients live on the
    redundant spanning family of right-nested brackets, one per word; they are
    not basis coordinates (see strichartz_lambda).  For k = 1 the sum
    degenerates to the net increment, which we adopt as the convention.
    """
    k = len(word)
    if k == 0:
        raise ValueError("empty word")
    if k > STRICHARTZ_LEVEL_CAP:
        raise ValueError(f"word length {k} exceeds the level cap {STRICHARTZ_LEVEL_CAP}")
    total = 0.0
    for perm in itertools.permutations(range(1, k + 1)):
        inv = [0] * k
        for pos, img in enumerate(perm, start=1):
            inv[img - 1] = pos
        permuted = tuple(word[inv[j - 1] - 1] for j in range(1, k + 1))
        if _integrals is not None:
            val = _integrals.get(permuted)
            if val is None:
                val = iterated_integral(path, permuted)
                _integrals[permuted] = val
        else:
            val = iterated_integral(path, permuted)
        e = _descents(perm)
        total += (-1) ** e / (k**2 * math.comb(k - 1, e)) * val
    return total


def strichartz_lambda(path: PiecewiseLinearPath, word: tuple[int, ...]) -> float:
    """Lyndon-basis coefficient of the log-signature at `word`, evaluated by
    the explicit Chen-Strichartz permutation sums.

    The development attaches one raw coefficient to the right-nested bracket
    of every word of length k; rewriting that redundant family in the Lyndon
    basis and collecting the target coordinate gives the basis coefficient.
    Independent of the tensor-log route (path_signature/log/project), which
    serves as its oracle.
    """
    k = len(word)
    if not is_lyndon(word):
        raise ValueError(f"{word} is not a Lyndon word; see strichartz_lambda_raw")
    if k > STRICHARTZ_LEVEL_CAP:
        raise ValueError(f"word length {k} exceeds the level cap {STRICHARTZ_LEVEL_CAP}")
    d = path.d
    integrals: dict[tuple[int, ...], float] = {}
    total = 0.0
    for other in itertools.product(range(1, d + 1), repeat=k):
        coeff = _nested_bracket_coeff(d, k, other, word)
        if coeff == 0:
            continue
        total += coeff * strichartz_lambda_raw(path, other, _integrals=integrals)
    return total


@lru_cache(maxsize=None)
def _nested_bracket_coeff(d: int, L: int, word: tuple[int, ...], lyndon: tuple[int, ...]) -> float:
    series = nested_bracket(d, L, word)
    return float(series.coeffs.get(lyndon, 0))
