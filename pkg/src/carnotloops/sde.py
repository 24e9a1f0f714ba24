"""Stratonovich flows driven by piecewise-linear paths, and the bracket
calculus of polynomial vector fields.

With a piecewise-linear driver the Stratonovich equation is an ODE on each
segment, dX = sum_i V_i(X) (dx_i/dt) dt, integrated here with the classical
fourth-order Runge-Kutta step.  Brackets, bracket-generated subspaces and the
graded dimension are computed exactly from the polynomial coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .freelie import get_basis, standard_factorization
from .paths import PiecewiseLinearPath
from .polynomials import Polynomial, parse_polynomial


class IntegrationBlowupError(RuntimeError):
    def __init__(self, segment: int):
        super().__init__(f"non-finite state while integrating segment {segment}")
        self.segment = segment


class SaturationError(RuntimeError):
    """Bracket span never reaches full rank within the explored levels."""


@dataclass(frozen=True)
class VectorFieldSpec:
    """d polynomial vector fields on R^n, closed under Lie bracket."""

    n: int
    fields: tuple  # tuple of d entries, each a tuple of n Polynomials

    def __post_init__(self):
        for f in self.fields:
            if len(f) != self.n:
                raise ValueError("each field needs n components")
            for comp in f:
                if comp.n != self.n:
                    raise ValueError("component arity mismatch")

    @property
    def d(self) -> int:
        return len(self.fields)

    @classmethod
    def from_polynomials(cls, fields) -> "VectorFieldSpec":
        fields = tuple(tuple(f) for f in fields)
        return cls(fields[0][0].n, fields)

    @classmethod
    def from_strings(cls, rows: list[list[str]], n: int | None = None) -> "VectorFieldSpec":
        if n is None:
            n = len(rows[0])
        polys = tuple(tuple(parse_polynomial(s, n) for s in row) for row in rows)
        return cls(n, polys)

    def field(self, i: int) -> tuple:
        """Components of V_i, 1-indexed."""
        return self.fields[i - 1]

    def eval_field_batch(self, i: int, X: np.ndarray) -> np.ndarray:
        return np.stack([comp.eval_batch(X) for comp in self.field(i)], axis=1)


def heisenberg_fields() -> VectorFieldSpec:
    """V1 = d/dx, V2 = d/dy + x d/dz on R^3; [V1, V2] = d/dz, step-2 nilpotent."""
    n = 3
    zero = Polynomial.zero(n)
    one = Polynomial.constant(n, 1)
    x1 = Polynomial.variable(n, 1)
    return VectorFieldSpec(n, ((one, zero, zero), (zero, one, x1)))


def commuting_linear_fields() -> VectorFieldSpec:
    """V1 = x (radial), V2 = (x2, 0): commuting, non-constant linear fields."""
    n = 2
    zero = Polynomial.zero(n)
    x1 = Polynomial.variable(n, 1)
    x2 = Polynomial.variable(n, 2)
    return VectorFieldSpec(n, ((x1, x2), (x2, zero)))


BUILTIN_FIELDS = {
    "heisenberg": heisenberg_fields,
    "commuting_linear": commuting_linear_fields,
}


def read_vector_field_file(filename: str) -> VectorFieldSpec:
    """Read the plain-text field format.

    First non-comment line: ``n d``.  Then d*n expression lines, field-major
    (all n components of field 1, then field 2, ...), each an expression in
    x1..xn built from +, -, *, ^ and integer or rational constants.
    """
    with open(filename, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh
                 if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError(f"{filename}: empty vector-field file")
    try:
        n, d = int(lines[0].split()[0]), int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{filename}: bad header, expected 'n d'") from exc
    body = lines[1:]
    if len(body) != n * d:
        raise ValueError(f"{filename}: expected {n * d} component lines, found {len(body)}")
    rows = [body[i * n:(i + 1) * n] for i in range(d)]
    return VectorFieldSpec.from_strings(rows, n=n)


def resolve_fields(spec: str) -> VectorFieldSpec:
    """Builtin name or path to a vector-field file."""
    if spec in BUILTIN_FIELDS:
        return BUILTIN_FIELDS[spec]()
    return read_vector_field_file(spec)


# ---------------------------------------------------------------------------
# bracket calculus

def lie_bracket_vf(v: tuple, w: tuple) -> tuple:
    """[V, W] = (dW) V - (dV) W, componentwise exact."""
    n = len(v)
    out = []
    for k in range(n):
        acc = Polynomial.zero(n)
        for j in range(n):
            acc = acc + v[j] * w[k].diff(j + 1) - w[j] * v[k].diff(j + 1)
        out.append(acc)
    return tuple(out)


def iterated_bracket(vf: VectorFieldSpec, word: tuple[int, ...]) -> tuple:
    """Right-nested commutator V_I = [V_{i1}, [V_{i2}, ... [V_{ik-1}, V_{ik}] ...]]."""
    if not word:
        raise ValueError("empty word")
    cur = vf.field(word[-1])
    for letter in reversed(word[:-1]):
        cur = lie_bracket_vf(vf.field(letter), cur)
    return cur


def lyndon_bracket_field(vf: VectorFieldSpec, word: tuple[int, ...]) -> tuple:
    """Image of the standard Lyndon bracketing of `word` under e_i -> V_i."""
    if len(word) == 1:
        return vf.field(word[0])
    u, v = standard_factorization(word)
    return lie_bracket_vf(lyndon_bracket_field(vf, u), lyndon_bracket_field(vf, v))


def _bracket_matrix(vf: VectorFieldSpec, x, pmin: int, K: int) -> np.ndarray:
    """Columns V_I(x) over Lyndon words with pmin <= |I| <= K.

    Lyndon bracketings span the same subspace as all right-nested brackets at
    each level, so the restriction loses nothing.
    """
    x = np.asarray(x, dtype=float)[None, :]
    basis = get_basis(vf.d, K, max_dim=None)
    cols = []
    for level in range(pmin, K + 1):
        for w in basis.by_level[level]:
            f = lyndon_bracket_field(vf, w)
            cols.append(np.array([comp.eval_batch(x)[0] for comp in f]))
    if not cols:
        return np.zeros((vf.n, 0))
    return np.stack(cols, axis=1)


def bracket_span_rank(vf: VectorFieldSpec, x, pmin: int, K: int,
                      rel_tol: float = 1e-10) -> int:
    """Numerical rank of span{V_I(x) : pmin <= |I| <= K}.

    Fields evaluate exactly at rational points up to float conversion, so rank
    deficiency is structural; the relative singular-value cutoff only guards
    against roundoff.
    """
    if K < pmin:
        raise ValueError("need K >= pmin")
    mat = _bracket_matrix(vf, x, pmin, K)
    if mat.shape[1] == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rel_tol * sv[0]))


def graded_dimension(vf: VectorFieldSpec, x, N: int, K: int) -> int:
    """Graded dimension of the bracket filtration above level N at x.

    With U_k(x) = span{V_I(x) : N+1 <= |I| <= k} and d(x) the first level at
    which U_k(x) = R^n, returns sum_{k=N+1}^{d(x)} k (dim U_k - dim U_{k-1}).
    Raises SaturationError when the span never fills R^n up to level K.
    """
    dims = []
    prev = 0
    sat_level = None
    for k in range(N + 1, K + 1):
        r = bracket_span_rank(vf, x, N + 1, k)
        dims.append(r)
        if r == vf.n:
            sat_level = k
            break
        prev = r
    if sat_level is None:
        raise SaturationError(
            f"span of brackets of length {N + 1}..{K} has rank {prev} < n = {vf.n} at {x}"
        )
    total = 0
    prev = 0
    for k, r in zip(range(N + 1, sat_level + 1), dims):
        total += k * (r - prev)
        prev = r
    return total


# ---------------------------------------------------------------------------
# Wong-Zakai integration

@dataclass
class FlowResult:
    state: np.ndarray
    trajectory: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def _rhs_batch(vf: VectorFieldSpec, X: np.ndarray, slopes: np.ndarray) -> np.ndarray:
    """sum_i V_i(X) * slopes[:, i] for a batch of states."""
    out = np.zeros_like(X)
    for i in range(1, vf.d + 1):
        out += vf.eval_field_batch(i, X) * slopes[:, i - 1][:, None]
    return out


def _rk4_segment(vf: VectorFieldSpec, X: np.ndarray, slopes: np.ndarray,
                 dt: float, substeps: int) -> np.ndarray:
    h = dt / substeps
    for _ in range(substeps):
        k1 = _rhs_batch(vf, X, slopes)
        k2 = _rhs_batch(vf, X + 0.5 * h * k1, slopes)
        k3 = _rhs_batch(vf, X + 0.5 * h * k2, slopes)
        k4 = _rhs_batch(vf, X + h * k3, slopes)
        X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return X


def integrate_flow(vf: VectorFieldSpec, x0, driver: PiecewiseLinearPath,
                   substeps: int = 8, keep_trajectory: bool = False,
                   error_estimate: bool = False) -> FlowResult:
    """Integrate dX = sum_i V_i(X) o dx_i along a piecewise-linear driver.

    Fourth-order in the substep size for a fixed driver.  With
    `error_estimate` each segment is also integrated at half the step to
    report the largest Richardson discrepancy.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if driver.d != vf.d:
        raise ValueError(f"driver dimension {driver.d} != number of fields {vf.d}")
    X = np.asarray(x0, dtype=float)[None, :].copy()
    if X.shape[1] != vf.n:
        raise ValueError(f"x0 must have length {vf.n}")
    traj = [X[0].copy()] if keep_trajectory else None
    max_err = 0.0
    dts = np.diff(driver.times)
    for seg, dx in enumerate(driver.increments()):
        dt = float(dts[seg])
        slopes = (dx / dt)[None, :]
        X_new = _rk4_segment(vf, X, slopes, dt, substeps)
        if error_estimate:
            X_half = _rk4_segment(vf, X, slopes, dt, 2 * substeps)
            max_err = max(max_err, float(np.max(np.abs(X_new - X_half))))
        X = X_new
        if not np.all(np.isfinite(X)):
            raise IntegrationBlowupError(seg)
        if keep_trajectory:
            traj.append(X[0].copy())
    diagnostics = {"substeps": substeps, "segments": driver.num_segments}
    if error_estimate:
        diagnostics["max_step_error"] = max_err
    return FlowResult(
        state=X[0],
        trajectory=np.array(traj) if keep_trajectory else None,
        diagnostics=diagnostics,
    )


def integrate_values_batch(vf: VectorFieldSpec, x0, values: np.ndarray,
                           T: float, substeps: int = 4) -> np.ndarray:
    """Terminal states for a batch of drivers on a uniform grid.

    `values` has shape (M, m+1, d): knot values of M piecewise-linear drivers
    over [0, T].  Returns (M, n).  Lanes are independent, so results never
    depend on how the batch is split.
    """
    values = np.asarray(values, dtype=float)
    M, knots, d = values.shape
    if d != vf.d:
        raise ValueError(f"driver dimension {d} != number of fields {vf.d}")
    m = knots - 1
    dt = float(T) / m
    X = np.tile(np.asarray(x0, dtype=float), (M, 1))
    for seg in range(m):
        slopes = (values[:, seg + 1, :] - values[:, seg, :]) / dt
        X = _rk4_segment(vf, X, slopes, dt, substeps)
        if not np.all(np.isfinite(X)):
            raise IntegrationBlowupError(seg)
    return X
