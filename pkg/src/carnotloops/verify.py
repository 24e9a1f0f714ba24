"""Acceptance criterion runners.

Each runner performs one numbered acceptance check and returns a
CriterionResult with deterministic details (no timings, no worker counts), so
serialized reports are byte-identical for a fixed seed and scale regardless
of how the work is parallelized.  The CLI `verify` subcommand runs the quick
profile; the test suite runs the full profile.
"""

from __future__ import annotations

import inspect
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__, holonomy, loops, sde, tensoralg
from .carnot import CarnotGroup, heisenberg_roundtrip
from .freelie import LieSeries, bch, get_basis, lie_bracket, witt_dimension
from .paths import PiecewiseLinearPath
from .util import derive_seed

HEISENBERG = sde.heisenberg_fields()


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.key}: {self.title}"


def _r(x: float) -> float:
    """Round for report readability while keeping repr deterministic."""
    return float(f"{float(x):.12g}")


# ---------------------------------------------------------------------------
# 1: algebra suite

def _brute_lyndon_count(d: int, j: int) -> int:
    """Independent oracle: words strictly smaller than all proper rotations."""
    count = 0
    for w in itertools.product(range(1, d + 1), repeat=j):
        if all(w < w[i:] + w[:i] for i in range(1, j)):
            count += 1
    return count


def _random_series(rng, d: int, L: int) -> LieSeries:
    basis = get_basis(d, L)
    return LieSeries(d, L, {w: float(c) for w, c in
                            zip(basis.words, rng.normal(size=basis.dim))})


def criterion_algebra(seed: int = 0, n_assoc: int = 100) -> CriterionResult:
    details: dict = {}
    ok = True

    witt_ok = all(
        witt_dimension(d, j) == _brute_lyndon_count(d, j)
        for d in (1, 2, 3) for j in range(1, 7)
    )
    details["witt_matches_bruteforce"] = witt_ok
    ok &= witt_ok

    # exact antisymmetry / Jacobi on basis elements (integer arithmetic)
    worst_jacobi = 0.0
    for d, L in ((2, 4), (3, 3)):
        basis = get_basis(d, L)
        gens = [LieSeries(d, L, {w: Fraction(1)}) for w in basis.words]
        for a, b, c in itertools.combinations(gens, 3):
            s = (lie_bracket(a, lie_bracket(b, c))
                 + lie_bracket(b, lie_bracket(c, a))
                 + lie_bracket(c, lie_bracket(a, b)))
            worst_jacobi = max(worst_jacobi, float(s.max_abs()))
        for a, b in itertools.combinations(gens, 2):
            s = lie_bracket(a, b) + lie_bracket(b, a)
            worst_jacobi = max(worst_jacobi, float(s.max_abs()))
    details["jacobi_antisymmetry_residual"] = _r(worst_jacobi)
    ok &= worst_jacobi <= 1e-12

    rng = np.random.default_rng(derive_seed(seed, 1))
    worst_assoc = 0.0
    worst_oracle = 0.0
    for _ in range(n_assoc):
        a = _random_series(rng, 2, 4)
        b = _random_series(rng, 2, 4)
        c = _random_series(rng, 2, 4)
        lhs = bch(bch(a, b), c)
        rhs = bch(a, bch(b, c))
        worst_assoc = max(worst_assoc, (lhs - rhs).max_abs())
    details["bch_associativity_residual"] = _r(worst_assoc)
    ok &= worst_assoc <= 1e-12

    for _ in range(10):
        a = 0.5 * _random_series(rng, 2, 4)
        b = 0.5 * _random_series(rng, 2, 4)
        direct = bch(a, b)
        ta = tensoralg.exp_series(tensoralg.lie_to_tensor(a))
        tb = tensoralg.exp_series(tensoralg.lie_to_tensor(b))
        via_tensor = tensoralg.project_to_lie(
            tensoralg.log_series(tensoralg.chen_concat(ta, tb)), tol=1e-8)
        worst_oracle = max(worst_oracle, (direct - via_tensor).max_abs())
        worst_oracle = max(worst_oracle, (bch(a, LieSeries.zero(2, 4)) - a).max_abs())
        worst_oracle = max(worst_oracle, bch(a, (-1) * a).max_abs())
    details["bch_vs_tensor_log_residual"] = _r(worst_oracle)
    ok &= worst_oracle <= 1e-12

    group = CarnotGroup(2, 2)
    worst_heis = 0.0
    for _ in range(50):
        g = rng.normal(size=3)
        h = rng.normal(size=3)
        prod = heisenberg_roundtrip(g) @ heisenberg_roundtrip(h)
        direct = heisenberg_roundtrip(group.mul(g, h))
        worst_heis = max(worst_heis, abs(prod.x - direct.x),
                         abs(prod.y - direct.y), abs(prod.z - direct.z))
    details["heisenberg_homomorphism_residual"] = _r(worst_heis)
    ok &= worst_heis <= 1e-12

    return CriterionResult("criterion_01", "algebra suite (Witt, Jacobi, BCH, Heisenberg)",
                           bool(ok), details)


# ---------------------------------------------------------------------------
# 2: Chen-Strichartz coefficients vs log-signature

def criterion_lambda_consistency(seed: int = 0, n_paths: int = 50) -> CriterionResult:
    rng = np.random.default_rng(derive_seed(seed, 2))
    worst = 0.0
    for d in (1, 2, 3):
        words = [w for w in get_basis(d, 3).words if len(w) <= 3]
        for _ in range(n_paths):
            m = int(rng.integers(2, 6))
            times = np.concatenate([[0.0], np.cumsum(rng.uniform(0.05, 0.6, m))])
            path = PiecewiseLinearPath(times, rng.normal(size=(m + 1, d)))
            series = tensoralg.log_signature(path, 3)
            for w in words:
                lam = tensoralg.strichartz_lambda(path, w)
                worst = max(worst, abs(lam - series.coeffs.get(w, 0.0)))
    passed = worst <= 1e-9
    return CriterionResult("criterion_02", "Chen-Strichartz sums match Lyndon log-signature",
                           passed, {"max_residual": _r(worst), "paths_per_d": n_paths})


# ---------------------------------------------------------------------------
# 3: bridge law

def criterion_bridge_law(seed: int = 0, M: int = 100_000, workers: int = 1) -> CriterionResult:
    m = 20
    vals = loops.bridge_values_batch(2, 1.0, m, M, derive_seed(seed, 3), workers=workers)
    rows = []
    ok = True
    for t_idx in (2, 5, 10, 15, 18):
        t = t_idx / m
        emp = float(vals[:, t_idx, 0].var(ddof=1))
        expect = t * (1 - t)
        se = expect * math.sqrt(2.0 / (M - 1))  # exact Gaussian variance-of-variance
        z = (emp - expect) / se
        rows.append({"t": _r(t), "empirical": _r(emp), "expected": _r(expect), "z": _r(z)})
        ok &= abs(z) <= 3.0
    return CriterionResult("criterion_03", "bridge variance matches t(1-t)",
                           bool(ok), {"M": M, "points": rows})


# ---------------------------------------------------------------------------
# 4: Gaveau-Levy closed form

def criterion_gaveau_levy(seed: int = 0, M: int = 100_000, m: int = 1024,
                          workers: int = 1) -> CriterionResult:
    lams = (0.5, 1.0, 2.0)
    Ts = (0.25, 0.5, 1.0)
    cfg = loops.SamplerConfig(m=m, eps=0.05)
    rows = []
    ok = True
    for ti, T in enumerate(Ts):
        obs = [f"cos({lam}*x3)" for lam in lams]
        ests = holonomy.estimate_holonomy_many(
            HEISENBERG, obs, [0.0, 0.0, 0.0], N=1, T=T, M=M, cfg=cfg,
            seed=derive_seed(seed, 4, ti), sampler="bridge", antithetic=False,
            substeps=1, workers=workers)
        for lam, est in zip(lams, ests):
            target = holonomy.sinh_determinant([lam], T)
            z = (est.value - target) / est.stderr
            rows.append({"lam": lam, "T": T, "estimate": _r(est.value),
                         "stderr": _r(est.stderr), "target": _r(target), "z": _r(z)})
            ok &= abs(z) <= 3.0
    return CriterionResult("criterion_04", "holonomy matches (lam T/2)/sinh(lam T/2)",
                           bool(ok), {"M": M, "m": m, "pairs": rows})


# ---------------------------------------------------------------------------
# 5: quadratic slope and the 1/24 constant

def criterion_quadratic_slope(seed: int = 0, M_total: int = 1_000_000, m: int = 128,
                              workers: int = 1) -> CriterionResult:
    cfg = loops.SamplerConfig(m=m, eps=0.05)
    fit = holonomy.slope_fit(HEISENBERG, "cos(x3)", [0.0, 0.0, 0.0], N=1,
                             T_grid=[0.4, 0.2, 0.1], M_total=M_total, cfg=cfg,
                             seed=derive_seed(seed, 5), sampler="bridge",
                             substeps=1, workers=workers)
    target = -1.0 / 24.0
    exponent_ok = (not fit.inconclusive) and abs(fit.exponent - 2.0) <= 0.2
    constant_ok = (not fit.inconclusive) and abs(fit.constant - target) <= 0.15 * abs(target)
    details = {
        "M_total": M_total, "m": m,
        "exponent": _r(fit.exponent), "exponent_se": _r(fit.exponent_se),
        "constant": _r(fit.constant), "constant_se": _r(fit.constant_se),
        "target_constant": _r(target),
        "grid": [{"T": _r(t), "diff": _r(dv), "stderr": _r(sv)}
                 for t, dv, sv in zip(fit.T_grid, fit.diffs, fit.stderrs)],
        "inconclusive": fit.inconclusive,
    }
    return CriterionResult("criterion_05", "small-T exponent 2 and constant -1/24",
                           bool(exponent_ok and constant_ok), details)


# ---------------------------------------------------------------------------
# 6: moment matrix

def criterion_moment_matrix(seed: int = 0, M: int = 100_000, m: int = 1024,
                            workers: int = 1) -> CriterionResult:
    cfg = loops.SamplerConfig(m=m, eps=0.05)
    mm = holonomy.loop_moment_matrix(2, 1, M, cfg, seed=derive_seed(seed, 6),
                                     workers=workers, antithetic=False)
    target = 1.0 / 12.0
    z_second = (mm.matrix[0, 0] - target) / mm.stderr[0, 0]
    z_first = mm.first_moments[0] / mm.first_stderr[0]
    eig = float(np.linalg.eigvalsh(mm.matrix).min())
    psd_ok = eig >= -3.0 * float(mm.stderr.max())
    ok = abs(z_second) <= 3.0 and abs(z_first) <= 3.0 and psd_ok
    details = {"M": M, "m": m,
               "entry": _r(mm.matrix[0, 0]), "entry_stderr": _r(mm.stderr[0, 0]),
               "target": _r(target), "z_entry": _r(z_second),
               "first_moment": _r(mm.first_moments[0]),
               "first_stderr": _r(mm.first_stderr[0]), "z_first": _r(z_first),
               "min_eigenvalue": _r(eig)}
    return CriterionResult("criterion_06", "level-2 moment 1/12 and vanishing first moments",
                           bool(ok), details)


# ---------------------------------------------------------------------------
# 7: sampler oracle equivalence

def _level3_coord(values: np.ndarray, word=(1, 1, 2)) -> np.ndarray:
    out = np.empty(len(values))
    for i, v in enumerate(values):
        series = tensoralg.log_signature(
            PiecewiseLinearPath(np.linspace(0, 1, len(v)), v), 3)
        out[i] = series.coeffs.get(word, 0.0)
    return out


def criterion_sampler_equivalence(seed: int = 0, M: int = 4000,
                                  workers: int = 1) -> CriterionResult:
    cfg_r = loops.SamplerConfig(m=8, eps=0.05)
    cfg_m = loops.SamplerConfig(m=8, eps=0.05, burnin=4000, thinning=25)
    rv, _res_r, stats = loops.rejection_values_batch(
        2, 2, 1.0, cfg_r, M, derive_seed(seed, 7, 0), workers=workers)
    mv, _res_m, diag = loops.mcmc_values_batch(2, 2, 1.0, cfg_m, M, derive_seed(seed, 7, 1))
    mid = rv.shape[1] // 2
    functionals = [
        ("midpoint_mean", rv[:, mid, 0], mv[:, mid, 0]),
        ("midpoint_second_moment", rv[:, mid, 0] ** 2, mv[:, mid, 0] ** 2),
        ("level3_112_mean", _level3_coord(rv), _level3_coord(mv)),
    ]
    rows = []
    ok = True
    for name, fr, fm in functionals:
        mean_r = float(fr.mean())
        se_r = float(fr.std(ddof=1) / math.sqrt(len(fr)))
        mean_m, se_m = holonomy._batch_means(fm)
        z = (mean_r - mean_m) / math.sqrt(se_r**2 + se_m**2)
        rows.append({"functional": name, "rejection": _r(mean_r), "rejection_se": _r(se_r),
                     "mcmc": _r(mean_m), "mcmc_se": _r(se_m), "z": _r(z)})
        ok &= abs(z) <= 3.0
    details = {"M": M, "acceptance_rate_rejection": _r(stats["acceptance_rate"]),
               "mcmc_local_acceptance": _r(diag["acceptance_rate"] or 0.0),
               "functionals": rows}
    return CriterionResult("criterion_07", "MCMC agrees with rejection oracle (N=2)",
                           bool(ok), details)


# ---------------------------------------------------------------------------
# 8: pathwise loop return for commuting fields

def criterion_loop_return(seed: int = 0, n_loops: int = 100,
                          substeps: int = 64) -> CriterionResult:
    vf = sde.commuting_linear_fields()
    assert all(p.is_zero for p in sde.iterated_bracket(vf, (1, 2)))
    x0 = np.array([0.7, -0.4])
    vals = loops.bridge_values_batch(2, 1.0, 32, n_loops, derive_seed(seed, 8))
    states = sde.integrate_values_batch(vf, x0, vals, 1.0, substeps=substeps)
    worst = float(np.max(np.abs(states - x0)))
    return CriterionResult("criterion_08", "commuting-field flows return to x0",
                           worst <= 1e-8,
                           {"loops": n_loops, "substeps": substeps, "max_return_error": _r(worst)})


# ---------------------------------------------------------------------------
# 9: rank and graded-dimension diagnostics

def criterion_rank_diagnostics() -> CriterionResult:
    x = [0.0, 0.0, 0.0]
    r1 = sde.bracket_span_rank(HEISENBERG, x, 1, 2)
    r2 = sde.bracket_span_rank(HEISENBERG, x, 2, 2)
    gd = sde.graded_dimension(HEISENBERG, x, 0, 3)
    commuting = sde.bracket_span_rank(sde.commuting_linear_fields(), [0.4, 0.2], 2, 3)
    try:
        sde.graded_dimension(HEISENBERG, x, 1, 4)
        saturation_error = False
    except sde.SaturationError:
        saturation_error = True
    ok = (r1 == 3 and r2 == 1 and gd == 4 and commuting == 0 and saturation_error)
    return CriterionResult("criterion_09", "bracket rank and graded dimension on fixtures",
                           bool(ok),
                           {"rank_pmin1": r1, "rank_pmin2": r2, "graded_dim_N0": gd,
                            "commuting_rank_pmin2": commuting,
                            "N1_saturation_error": saturation_error})


# ---------------------------------------------------------------------------
# 10: determinism across worker counts

def _mini_stochastic_report(seed: int, workers: int) -> dict:
    c3 = criterion_bridge_law(seed, M=4000, workers=workers)
    cfg = loops.SamplerConfig(m=64, eps=0.05)
    est = holonomy.estimate_holonomy(HEISENBERG, "cos(x3)", [0.0, 0.0, 0.0], 1, 0.5,
                                     4000, cfg, seed=derive_seed(seed, 10),
                                     sampler="bridge", substeps=1, workers=workers)
    rv, res, _stats = loops.rejection_values_batch(
        2, 2, 1.0, loops.SamplerConfig(m=8, eps=0.1), 64,
        derive_seed(seed, 11), workers=workers)
    return {"bridge": c3.details, "estimate": [_r(est.value), _r(est.stderr)],
            "rejection_checksum": _r(float(rv.sum() + res.sum()))}


def criterion_determinism(seed: int = 0, workers_list=(1, 2, 8),
                          deep: bool = False) -> CriterionResult:
    """Identical stochastic results for 1, 2 and 8 workers.

    The quick mode compares a small stochastic probe; the full mode rebuilds
    the entire quick verify report per worker count and compares the bytes
    (the report deliberately echoes no worker count or timing).
    """
    blobs = []
    for w in workers_list:
        if deep:
            report = build_report(quick=True, seed=seed, workers=w)
            blobs.append(report_bytes(report))
        else:
            blobs.append(json.dumps(_mini_stochastic_report(seed, workers=w),
                                    sort_keys=True).encode())
    ok = len(set(blobs)) == 1
    return CriterionResult("criterion_10", "byte-identical results across worker counts",
                           bool(ok), {"workers": list(workers_list), "identical": ok,
                                      "deep": deep})


# ---------------------------------------------------------------------------
# profiles and report assembly

FULL_PROFILE = {
    "criterion_01": (criterion_algebra, {"n_assoc": 100}),
    "criterion_02": (criterion_lambda_consistency, {"n_paths": 50}),
    "criterion_03": (criterion_bridge_law, {"M": 100_000}),
    "criterion_04": (criterion_gaveau_levy, {"M": 100_000, "m": 1024}),
    "criterion_05": (criterion_quadratic_slope, {"M_total": 1_000_000, "m": 128}),
    "criterion_06": (criterion_moment_matrix, {"M": 100_000, "m": 1024}),
    "criterion_07": (criterion_sampler_equivalence, {"M": 4000}),
    "criterion_08": (criterion_loop_return, {"n_loops": 100}),
    "criterion_09": (criterion_rank_diagnostics, {}),
    "criterion_10": (criterion_determinism, {"deep": True}),
}

QUICK_PROFILE = {
    "criterion_01": (criterion_algebra, {"n_assoc": 25}),
    "criterion_02": (criterion_lambda_consistency, {"n_paths": 8}),
    "criterion_03": (criterion_bridge_law, {"M": 20_000}),
    "criterion_04": (criterion_gaveau_levy, {"M": 8000, "m": 256}),
    "criterion_05": (criterion_quadratic_slope, {"M_total": 60_000, "m": 64}),
    "criterion_06": (criterion_moment_matrix, {"M": 20_000, "m": 256}),
    "criterion_07": (criterion_sampler_equivalence, {"M": 600}),
    "criterion_08": (criterion_loop_return, {"n_loops": 20}),
    "criterion_09": (criterion_rank_diagnostics, {}),
    "criterion_10": (criterion_determinism, {}),
}

DEFAULT_VERIFY_SEED = 20260809


def run_criteria(profile: dict, seed: int, workers: int = 1,
                 subset: list[str] | None = None, verbose_print=None) -> list[CriterionResult]:
    out = []
    for key, (fn, kwargs) in profile.items():
        if subset and key not in subset:
            continue
        params = inspect.signature(fn).parameters
        kw = dict(kwargs)
        if "seed" in params:
            kw["seed"] = seed
        if "workers" in params:
            kw.setdefault("workers", workers)
        result = fn(**kw)
        if verbose_print:
            verbose_print(result.line())
        out.append(result)
    return out


def build_report(quick: bool, seed: int, workers: int = 1,
                 verbose_print=None) -> dict:
    profile = QUICK_PROFILE if quick else FULL_PROFILE
    results = run_criteria(profile, seed=seed, workers=workers, verbose_print=verbose_print)
    return {
        "package": "carnotloops",
        "version": __version__,
        "mode": "quick" if quick else "full",
        "seed": seed,
        "criteria": [
            {"key": r.key, "title": r.title, "passed": r.passed, "details": r.details}
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }


def report_bytes(report: dict) -> bytes:
    return json.dumps(report, sort_keys=True, indent=1).encode()
