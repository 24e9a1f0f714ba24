"""The free Carnot group of step N over R^d in exponential coordinates.

Points are coordinate vectors over the ordered Lyndon basis (coordinates of
the first kind): the identity is the zero vector, inversion is negation, and
the group law is the truncated Baker-Campbell-Hausdorff product.  The
left-invariant frame extending the coordinate directions at the identity is
obtained by differentiating the group law exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import tensoralg
from .freelie import (
    LieSeries,
    bch,
    bernoulli_number,
    get_basis,
    lie_bracket,
)
from .paths import PiecewiseLinearPath


class CarnotGroup:
    """G_N(R^d): group operations on exponential-coordinate vectors.

    Vectors are indexed by the Lyndon words of ``basis.words`` (level
    ascending, lexicographic within a level).
    """

    def __init__(self, d: int, N: int, max_dim: int | None = 1000):
        self.d = d
        self.N = N
        self.basis = get_basis(d, N, max_dim=max_dim)

    @property
    def dim(self) -> int:
        return self.basis.dim

    @property
    def words(self) -> list[tuple[int, ...]]:
        return self.basis.words

    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def series(self, g: np.ndarray) -> LieSeries:
        return LieSeries.from_vector(self.basis, np.asarray(g, dtype=float))

    def vector(self, s: LieSeries) -> np.ndarray:
        return s.to_vector(self.basis)

    def _checked(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(f"expected coordinate vector of length {self.dim}, got {g.shape}")
        return g

    def mul(self, g, h) -> np.ndarray:
        """Group product: BCH of the coordinate series, polynomial of degree N."""
        g, h = self._checked(g), self._checked(h)
        return self.vector(bch(self.series(g), self.series(h)))

    def inverse(self, g) -> np.ndarray:
        return -self._checked(g)

    def dilate(self, g, lam: float) -> np.ndarray:
        """Dilation: level-j coordinates scale by lam^j."""
        g = self._checked(g)
        scale = np.array([float(lam) ** len(w) for w in self.words])
        return g * scale

    def left_invariant_field(self, i: int, g) -> np.ndarray:
        """D_i at g: the derivative at s=0 of g * (s e_i).

        Exact differentiation of the BCH polynomial gives the terminating
        series sum_k ((-1)^k B_k / k!) ad_g^k(e_i) in the step-N truncation.
        """
        if not 1 <= i <= self.d:
            raise ValueError(f"field index {i} out of range 1..{self.d}")
        gs = self.series(self._checked(g))
        term = LieSeries.generator(self.d, self.N, i)
        acc = term
        for k in range(1, self.N):
            term = lie_bracket(gs, term)
            if not term.coeffs:
                break
            coeff = float((-1) ** k * bernoulli_number(k) / Fraction(math.factorial(k)))
            acc = acc + coeff * term
        return self.vector(acc)

    def frame(self, g) -> np.ndarray:
        """All D_i at g as the columns of a (dim, d) matrix."""
        return np.stack([self.left_invariant_field(i, g) for i in range(1, self.d + 1)], axis=1)

    def lift_path(self, path: PiecewiseLinearPath, tol: float = 1e-9) -> np.ndarray:
        """Coordinates of the lift at each knot time, shape (m+1, dim).

        Knot j carries the Lyndon coordinates of log of the signature of the
        path restricted to [t_0, t_j]; the lift of a concatenation is then the
        group product of the lifts.
        """
        if path.d != self.d:
            raise ValueError(f"path dimension {path.d} != group dimension {self.d}")
        out = np.zeros((len(path.times), self.dim))
        sig = tensoralg.identity_series(self.d, self.N)
        for j, dx in enumerate(path.increments(), start=1):
            sig = tensoralg.chen_concat(sig, tensoralg.segment_signature(dx, self.N))
            out[j] = self.vector(tensoralg.project_to_lie(tensoralg.log_series(sig), tol=tol))
        return out

    def lift_endpoint(self, path: PiecewiseLinearPath, tol: float = 1e-9) -> np.ndarray:
        return self.vector(tensoralg.log_signature(path, self.N, tol=tol))


@lru_cache(maxsize=None)
def get_group(d: int, N: int) -> CarnotGroup:
    return CarnotGroup(d, N)


# ---------------------------------------------------------------------------
# Heisenberg fixture: the 3x3 unipotent matrix representation of G_2(R^2)

_D1 = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_D2 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
_D3 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


@dataclass(frozen=True)
class HeisenbergMatrix:
    """Upper-triangular unipotent 3x3 matrix [[1, x, z], [0, 1, y], [0, 0, 1]]."""

    x: float
    y: float
    z: float

    def as_array(self) -> np.ndarray:
        return np.array([[1.0, self.x, self.z], [0.0, 1.0, self.y], [0.0, 0.0, 1.0]])

    def __matmul__(self, other: "HeisenbergMatrix") -> "HeisenbergMatrix":
        p = self.as_array() @ other.as_array()
        return HeisenbergMatrix(p[0, 1], p[1, 2], p[0, 2])


def heisenberg_roundtrip(g) -> HeisenbergMatrix:
    """Matrix exponential of g1 D1 + g2 D2 + g3 D3 for a (d=2, N=2) point.

    The generator is nilpotent of order 3, so the exponential series stops at
    the quadratic term.
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (3,):
        raise ValueError("expected coordinates over the basis [(1), (2), (12)] of G_2(R^2)")
    m = g[0] * _D1 + g[1] * _D2 + g[2] * _D3
    e = np.eye(3) + m + (m @ m) / 2.0
    return HeisenbergMatrix(e[0, 1], e[1, 2], e[0, 2])
