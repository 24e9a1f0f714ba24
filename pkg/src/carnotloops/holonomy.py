"""Monte Carlo estimation of the depth-N holonomy operator.

For fields V_1..V_d and an N-step loop driver on [0, T], the holonomy
operator applies f to the terminal point of the loop-driven flow and
averages.  This module estimates it, extracts the small-T behaviour
(T^(N+1) rate and limiting constant), assembles the level-(N+1) moment
matrix that parameterizes the limit operator, applies that operator to
symbolic observables, and evaluates the step-2 nilpotent closed form
against which the Monte Carlo is checked.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import sympy

from . import loops, sde, tensoralg
from .freelie import get_basis
from .paths import from_values
from .util import derive_seed

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# observables: polynomial / trig-polynomial functions with exact derivatives

_ALLOWED_FUNCS = {"cos": sympy.cos, "sin": sympy.sin, "pi": sympy.pi, "exp": sympy.exp}


class Observable:
    """Smooth observable f: R^n -> R with symbolic derivatives and fast
    vectorized evaluation.  Restricted to polynomial / trig-polynomial
    expressions so repeated field applications stay exact."""

    def __init__(self, expr, n: int):
        self.n = n
        self.symbols = sympy.symbols(f"x1:{n + 1}")
        if isinstance(expr, str):
            local = {f"x{i + 1}": self.symbols[i] for i in range(n)}
            local.update(_ALLOWED_FUNCS)
            expr = sympy.sympify(expr.replace("^", "**"), locals=local)
        self.expr = sympy.sympify(expr)
        self._fn = None

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        if self._fn is None:
            self._fn = sympy.lambdify(self.symbols, self.expr, modules="numpy")
        out = self._fn(*(X[:, j] for j in range(self.n)))
        return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()

    def __call__(self, x) -> float:
        return self.eval_batch(np.asarray(x, dtype=float)[None, :])[0]

    def apply_field(self, components) -> "Observable":
        """Directional derivative sum_k V^k df/dx_k as a new Observable."""
        expr = sympy.Integer(0)
        for k, comp in enumerate(components):
            expr += comp.to_sympy(self.symbols) * sympy.diff(self.expr, self.symbols[k])
        return Observable(sympy.expand(expr), self.n)

    def __repr__(self) -> str:
        return f"Observable({self.expr})"


def as_observable(f, n: int) -> Observable:
    if isinstance(f, Observable):
        if f.n != n:
            raise ValueError("observable arity mismatch")
        return f
    return Observable(f, n)


# ---------------------------------------------------------------------------
# driver generation shared by the estimators

def _loop_values(d: int, N: int, T: float, M: int, cfg: loops.SamplerConfig,
                 seed: int, sampler: str, workers: int, antithetic: bool):
    """(values, info) for M loop drivers of step N on [0, T]."""
    if sampler == "auto":
        sampler = "bridge" if N == 1 else "mcmc"
    if sampler == "bridge":
        if N != 1:
            raise ValueError("the plain bridge sampler is exact only for N = 1")
        vals = loops.bridge_values_batch(d, T, cfg.m, M, seed,
                                         workers=workers, antithetic=antithetic)
        return vals, {"sampler": "bridge"}
    if sampler == "reject":
        vals, _res, stats = loops.rejection_values_batch(
            d, N, T, cfg, M, seed, workers=workers, antithetic=antithetic)
        return vals, {"sampler": "reject", **stats}
    if sampler == "mcmc":
        vals, _res, diag = loops.mcmc_values_batch(d, N, T, cfg, M, seed)
        return vals, {"sampler": "mcmc", **diag}
    raise ValueError(f"unknown sampler {sampler!r}")


def _pair_stats(values: np.ndarray, antithetic: bool):
    """Mean and standard error; antithetic batches aggregate over pair means."""
    if antithetic:
        pairs = values.reshape(-1, 2).mean(axis=1)
    else:
        pairs = values
    mean = float(np.mean(pairs))
    se = float(np.std(pairs, ddof=1) / np.sqrt(len(pairs))) if len(pairs) > 1 else float("nan")
    return mean, se


@dataclass
class HolonomyEstimate:
    value: float
    stderr: float
    M: int
    T: float
    N: int
    config: dict = field(default_factory=dict)


def estimate_holonomy_many(vf: sde.VectorFieldSpec, fs, x0, N: int, T: float,
                           M: int, cfg: loops.SamplerConfig, seed: int,
                           sampler: str = "auto", antithetic: bool = True,
                           substeps: int = 2, workers: int = 1) -> list[HolonomyEstimate]:
    """Estimate E[f(X_T^x)] for several observables over one batch of flows.

    The observables share drivers, so their estimates are correlated but each
    is individually unbiased with an honest standard error.  For the mcmc
    sampler the stderr uses batch means (20 batches) to absorb the chain's
    autocorrelation, and antithetic pairing is disabled.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    fs = [as_observable(f, vf.n) for f in fs]
    if sampler == "auto":
        sampler = "bridge" if N == 1 else "mcmc"
    if sampler == "mcmc":
        antithetic = False
    values, info = _loop_values(d=vf.d, N=N, T=T, M=M, cfg=cfg, seed=seed,
                                sampler=sampler, workers=workers, antithetic=antithetic)
    states = sde.integrate_values_batch(vf, x0, values, T, substeps=substeps)
    echo = {"sampler_info": info, "sampler_cfg": cfg.echo(), "seed": seed,
            "antithetic": antithetic, "substeps": substeps}
    out = []
    for f in fs:
        fx = f.eval_batch(states)
        if sampler == "mcmc":
            mean, se = _batch_means(fx)
        else:
            mean, se = _pair_stats(fx, antithetic)
        out.append(HolonomyEstimate(mean, se, M, T, N, dict(echo)))
    return out


def estimate_holonomy(vf: sde.VectorFieldSpec, f, x0, N: int, T: float, M: int,
                      cfg: loops.SamplerConfig, seed: int, **kwargs) -> HolonomyEstimate:
    """Monte Carlo estimate of the depth-N holonomy operator applied to f at x0."""
    return estimate_holonomy_many(vf, [f], x0, N, T, M, cfg, seed, **kwargs)[0]


def _batch_means(x: np.ndarray, nbatch: int = 20):
    n = len(x)
    nbatch = min(nbatch, n)
    b = n // nbatch
    bm = x[: nbatch * b].reshape(nbatch, b).mean(axis=1)
    return float(np.mean(x[: nbatch * b])), float(np.std(bm, ddof=1) / np.sqrt(nbatch))


# ---------------------------------------------------------------------------
# moment matrix of level-(N+1) log-signature coordinates of unit-time loops

@dataclass
class MomentMatrix:
    N: int
    d: int
    words: list
    matrix: np.ndarray        # E[c_I c_J], symmetric
    stderr: np.ndarray        # per-entry standard error
    first_moments: np.ndarray
    first_stderr: np.ndarray
    M: int
    config: dict = field(default_factory=dict)


def loop_moment_matrix(d: int, N: int, M: int, cfg: loops.SamplerConfig, seed: int,
                       sampler: str = "auto", workers: int = 1,
                       antithetic: bool = True) -> MomentMatrix:
    """Monte Carlo second moments of level-(N+1) Lyndon log-signature
    coordinates of unit-time N-step loops, with per-entry standard errors."""
    if M < 100:
        raise ValueError("need M >= 100 for a usable moment matrix")
    basis = get_basis(d, N + 1, max_dim=None)
    words = basis.by_level[N + 1]
    if sampler == "auto":
        sampler = "bridge" if N == 1 else "mcmc"
    if sampler == "mcmc":
        antithetic = False
    values, info = _loop_values(d=d, N=N, T=1.0, M=M, cfg=cfg, seed=seed,
                                sampler=sampler, workers=workers, antithetic=antithetic)
    if N == 1:
        # level-2 Lyndon coordinates are exactly the pairwise polygon areas
        coords = loops.pair_areas(values)
    else:
        coords = np.empty((M, len(words)))
        for i in range(M):
            series = tensoralg.log_signature(from_values(values[i], T=1.0), N + 1)
            coords[i] = [series.coeffs.get(w, 0.0) for w in words]
    W = len(words)
    matrix = np.empty((W, W))
    stderr = np.empty((W, W))
    first = np.empty(W)
    first_se = np.empty(W)
    for a in range(W):
        first[a], first_se[a] = _pair_stats(coords[:, a], antithetic)
        for b in range(a, W):
            mean, se = _pair_stats(coords[:, a] * coords[:, b], antithetic)
            matrix[a, b] = matrix[b, a] = mean
            stderr[a, b] = stderr[b, a] = se
    return MomentMatrix(N, d, list(words), matrix, stderr, first, first_se, M,
                        {"sampler_info": info, "sampler_cfg": cfg.echo(), "seed": seed,
                         "antithetic": antithetic})


def exact_moment_coefficients(d: int, N: int) -> tuple[list, np.ndarray]:
    """Closed-form c_IJ for N = 0 (identity) and N = 1 ((1/12) identity).

    N = 0: level-1 coordinates of the unit-time driver are B_1, so
    E[c_i c_j] = delta_ij.  N = 1: level-2 coordinates of the bridge are the
    pairwise Levy areas, with variance 1/12 and vanishing cross moments by
    coordinate-flip symmetry.  No closed form is available beyond N = 1.
    """
    basis = get_basis(d, N + 1, max_dim=None)
    words = basis.by_level[N + 1]
    if N == 0:
        return list(words), np.eye(len(words))
    if N == 1:
        return list(words), np.eye(len(words)) / 12.0
    raise ValueError(f"no closed-form moment coefficients for N = {N}; "
                     "pass a MomentMatrix from loop_moment_matrix")


def delta_apply(vf: sde.VectorFieldSpec, f, x, N: int,
                moments: MomentMatrix | None = None) -> float:
    """Apply the limiting second-order operator:

        (1/2) sum_{|I|=|J|=N+1} c_IJ (V_I V_J f)(x)

    over Lyndon words, with V_I the standard bracketing of the fields.  For
    N in {0, 1} the exact coefficients are used unless a Monte Carlo
    MomentMatrix is supplied; its error bars then propagate to the result.
    """
    obs = as_observable(f, vf.n)
    if moments is None:
        words, c = exact_moment_coefficients(vf.d, N)
    else:
        if moments.N != N or moments.d != vf.d:
            raise ValueError("moment matrix does not match (d, N)")
        words, c = moments.words, moments.matrix
    x = np.asarray(x, dtype=float)
    total = 0.0
    fields = {w: sde.lyndon_bracket_field(vf, w) for w in words}
    for a, I in enumerate(words):
        if all(p.is_zero for p in fields[I]):
            continue
        for b, J in enumerate(words):
            if c[a, b] == 0.0:
                continue
            second = obs.apply_field(fields[J]).apply_field(fields[I])
            total += 0.5 * c[a, b] * second(x)
    return float(total)


# ---------------------------------------------------------------------------
# small-T slope extraction

@dataclass
class SlopeFit:
    T_grid: np.ndarray
    diffs: np.ndarray
    stderrs: np.ndarray
    exponent: float
    exponent_se: float
    constant: float
    constant_se: float
    covariance: np.ndarray | None
    inconclusive: bool
    estimates: list = field(default_factory=list)


def slope_fit(vf: sde.VectorFieldSpec, f, x0, N: int, T_grid, M_total: int,
              cfg: loops.SamplerConfig, seed: int, sampler: str = "auto",
              antithetic: bool = False, substeps: int = 2,
              workers: int = 1) -> SlopeFit:
    """Weighted least-squares fit of log|H_T f - f| against log T.

    The Monte Carlo budget M_total is split evenly across the grid; each grid
    point uses an independent derived seed.  Points whose difference is not
    statistically distinguishable from zero (3 sigma) are excluded; with
    fewer than two usable points the fit is flagged inconclusive.  The
    constant is reported with the common sign of the significant differences,
    so it estimates the limit of (H_T f - f) / T^exponent.
    """
    T_grid = np.asarray(sorted(T_grid, reverse=True), dtype=float)
    if len(T_grid) < 3:
        raise ValueError("need at least 3 grid points")
    obs = as_observable(f, vf.n)
    fx0 = obs(np.asarray(x0, dtype=float))
    M_point = int(M_total // len(T_grid))
    diffs = np.empty(len(T_grid))
    ses = np.empty(len(T_grid))
    estimates = []
    for i, T in enumerate(T_grid):
        est = estimate_holonomy(vf, obs, x0, N, float(T), M_point, cfg,
                                seed=derive_seed(seed, i), sampler=sampler,
                                antithetic=antithetic, substeps=substeps,
                                workers=workers)
        estimates.append(est)
        diffs[i] = est.value - fx0
        ses[i] = est.stderr
    usable = np.abs(diffs) > 3.0 * ses
    if usable.sum() < 2 or len(set(np.sign(diffs[usable]))) > 1:
        return SlopeFit(T_grid, diffs, ses, float("nan"), float("nan"),
                        float("nan"), float("nan"), None, True, estimates)
    sign = float(np.sign(diffs[usable][0]))
    logT = np.log(T_grid[usable])
    y = np.log(np.abs(diffs[usable]))
    w = (np.abs(diffs[usable]) / ses[usable]) ** 2  # 1 / var(log|D|)
    X = np.stack([np.ones_like(logT), logT], axis=1)
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ y)
    intercept, slope = beta
    slope_se = math.sqrt(cov[1, 1])
    constant = sign * math.exp(intercept)
    constant_se = abs(constant) * math.sqrt(cov[0, 0])
    return SlopeFit(T_grid, diffs, ses, float(slope), float(slope_se),
                    float(constant), float(constant_se), cov, False, estimates)


# ---------------------------------------------------------------------------
# step-2 nilpotent closed form

def _x_over_sinh(x: float) -> float:
    if abs(x) < 1e-4:
        x2 = x * x
        return 1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    return x / math.sinh(x)


def sinh_determinant(omegas, T: float) -> float:
    """Closed form of the step-2 holonomy operator on a Fourier mode.

    For skew eigen-parameters omega (one per conjugate pair) this is
    prod (T w / 2) / sinh(T w / 2), the value of
    det(T Omega / (2 sinh(T Omega / 2)))^(1/2) on that mode; evaluated by a
    series near 0 for stability, and equal to 1 at omega = 0.
    """
    total = 1.0
    for w in np.atleast_1d(np.asarray(omegas, dtype=float)):
        total *= _x_over_sinh(0.5 * T * w)
    return float(total)
