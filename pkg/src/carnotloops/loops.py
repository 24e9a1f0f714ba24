"""Samplers for N-step Brownian loops.

An N-step loop is Brownian motion on [0, T] conditioned so its lift into the
free step-N Carnot group returns to the identity at time T.  Discretized on a
uniform m-step grid:

* level 1 (the endpoint) is enforced exactly by linear Gaussian conditioning,
  which is just mean-centering of the increments;
* levels 2..N are enforced through an epsilon-window on the homogeneous norm
  of the log-signature, either by exact rejection from the discrete bridge
  law (the oracle) or by a pCN-style Metropolis chain against an annealed
  soft-constraint density (the workhorse).

The pair (m, epsilon) is the discretization of the conditioned law; both
knobs are echoed into every artifact this module produces.
"""

from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tensoralg
from .freelie import LieSeries
from .paths import PiecewiseLinearPath, from_values
from .util import parallel_chunk_map, substream

logger = logging.getLogger(__name__)


class IterationCapError(RuntimeError):
    def __init__(self, tries: int, accepted: int):
        rate = accepted / tries if tries else 0.0
        super().__init__(
            f"rejection sampler exhausted {tries} proposals with {accepted} acceptances "
            f"(rate {rate:.2e}); widen eps or reduce N/m"
        )
        self.tries = tries
        self.accepted = accepted
        self.acceptance_rate = rate


class SamplerDiagnosticWarning(UserWarning):
    pass


@dataclass
class SamplerConfig:
    """Discretization and MCMC knobs for the loop samplers."""

    m: int = 64                # uniform steps per path
    eps: float = 0.05          # homogeneous-norm window for levels 2..N
    seed: int = 0
    rho: float = 0.2           # pCN proposal scale, in (0, 1)
    burnin: int = 2000
    thinning: int = 5
    sigma0: float = 1.0        # soft-constraint scale at the start of annealing
    indep_prob: float = 0.3    # probability of a full-refresh (rho = 1) proposal
    max_tries: int = 2_000_000
    adapt: bool = True

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if not 0.0 <= self.indep_prob < 1.0:
            raise ValueError("indep_prob must lie in [0, 1)")

    def echo(self) -> dict:
        return {
            "m": self.m, "eps": self.eps, "seed": self.seed, "rho": self.rho,
            "burnin": self.burnin, "thinning": self.thinning,
            "sigma0": self.sigma0, "indep_prob": self.indep_prob,
            "max_tries": self.max_tries, "adapt": self.adapt,
        }


@dataclass
class LoopSample:
    path: PiecewiseLinearPath
    N: int
    residual: float
    weight: float = 1.0


# ---------------------------------------------------------------------------
# discrete Brownian bridge (the N = 1 loop), exact in law

def bridge_values(rng: np.random.Generator, d: int, T: float, m: int) -> np.ndarray:
    """Knot values of a discrete d-dimensional Brownian bridge, shape (m+1, d).

    V_j = W_j - (j/m) W_m for a random walk W with N(0, T/m) increments; this
    is the exact finite-dimensional bridge law and pins both endpoints to
    zero bit-exactly.
    """
    steps = rng.normal(0.0, np.sqrt(T / m), size=(m, d))
    walk = np.vstack([np.zeros((1, d)), np.cumsum(steps, axis=0)])
    frac = (np.arange(m + 1) / m)[:, None]
    vals = walk - frac * walk[-1]
    vals[-1] = 0.0
    return vals


def sample_bridge(d: int, T: float, m: int, rng: np.random.Generator) -> LoopSample:
    """One exact discrete Brownian bridge as a step-1 loop (residual 0)."""
    vals = bridge_values(rng, d, T, m)
    return LoopSample(from_values(vals, T=T), N=1, residual=0.0)


def bridge_values_batch(d: int, T: float, m: int, count: int, seed: int,
                        workers: int = 1, antithetic: bool = False) -> np.ndarray:
    """(count, m+1, d) bridge values from per-sample counter-based substreams.

    With `antithetic`, odd indices hold the negation of the preceding even
    sample; count must then be even.
    """
    if antithetic and count % 2:
        raise ValueError("antithetic batches need an even count")

    def chunk(lo: int, hi: int) -> np.ndarray:
        out = np.empty((hi - lo, m + 1, d))
        for idx in range(lo, hi):
            if antithetic:
                if idx % 2:
                    out[idx - lo] = -(out[idx - lo - 1] if idx - 1 >= lo
                                      else bridge_values(substream(seed, idx - 1), d, T, m))
                else:
                    out[idx - lo] = bridge_values(substream(seed, idx), d, T, m)
            else:
                out[idx - lo] = bridge_values(substream(seed, idx), d, T, m)
        return out

    return parallel_chunk_map(chunk, count, workers=workers)


# ---------------------------------------------------------------------------
# log-signature residuals

def loop_logsig(sample: LoopSample | PiecewiseLinearPath, L: int) -> LieSeries:
    """Lyndon-coordinate log-signature of a loop sample up to level L."""
    path = sample.path if isinstance(sample, LoopSample) else sample
    return tensoralg.log_signature(path, L)


def homogeneous_residual(series: LieSeries, T: float, N: int) -> float:
    """max over levels j in 2..N of |c / T^(j/2)|^(1/j) over coordinates c.

    Weighting by the dilation exponents makes one epsilon meaningful across
    loop lengths T.
    """
    worst = 0.0
    for w, c in series.coeffs.items():
        j = len(w)
        if 2 <= j <= N:
            worst = max(worst, float(abs(c) / T ** (j / 2.0)) ** (1.0 / j))
    return worst


def pair_areas(values: np.ndarray) -> np.ndarray:
    """Polygon Levy areas of all coordinate pairs i<j for a batch of loops.

    values: (M, m+1, d) knot values starting at 0.  Returns (M, d(d-1)/2) in
    the lexicographic pair order matching level-2 Lyndon words.  Each area is
    the level-2 Lyndon log-signature coordinate of the polygonal path.
    """
    vals = np.asarray(values, dtype=float)
    inc = np.diff(vals, axis=1)
    start = vals[:, :-1, :]
    d = vals.shape[2]
    cols = []
    for a, b in itertools.combinations(range(d), 2):
        cols.append(0.5 * np.sum(start[:, :, a] * inc[:, :, b]
                                 - start[:, :, b] * inc[:, :, a], axis=1))
    return np.stack(cols, axis=1) if cols else np.zeros((vals.shape[0], 0))


def residuals_batch(values: np.ndarray, T: float, N: int) -> np.ndarray:
    """Homogeneous residual of levels 2..N for a batch of loop values."""
    M = values.shape[0]
    if N <= 1:
        return np.zeros(M)
    if N == 2:
        areas = pair_areas(values)
        if areas.shape[1] == 0:
            return np.zeros(M)
        return np.sqrt(np.max(np.abs(areas), axis=1) / T)
    out = np.empty(M)
    for i in range(M):
        series = tensoralg.log_signature(from_values(values[i], T=T), N)
        out[i] = homogeneous_residual(series, T, N)
    return out


# ---------------------------------------------------------------------------
# exact rejection sampler (oracle for N >= 2)

def sample_loop_rejection(d: int, N: int, T: float, cfg: SamplerConfig,
                          rng: np.random.Generator) -> LoopSample:
    """Draw discrete bridges until the level-2..N residual fits the window.

    The output law is exactly the discrete bridge law restricted to the
    epsilon-window.  Feasible only while the acceptance rate is workable
    (small d, N <= 3, modest m).
    """
    block = 256
    tries = 0
    while tries < cfg.max_tries:
        raw = rng.normal(0.0, np.sqrt(T / cfg.m), size=(block, cfg.m, d))
        walks = np.concatenate([np.zeros((block, 1, d)), np.cumsum(raw, axis=1)], axis=1)
        frac = (np.arange(cfg.m + 1) / cfg.m)[None, :, None]
        vals = walks - frac * walks[:, -1:, :]
        vals[:, -1, :] = 0.0
        res = residuals_batch(vals, T, N)
        hits = np.nonzero(res <= cfg.eps)[0]
        if len(hits):
            k = int(hits[0])
            tries += k + 1
            logger.debug("rejection accepted after %d proposals", tries)
            return LoopSample(from_values(vals[k], T=T), N=N, residual=float(res[k]))
        tries += block
    raise IterationCapError(tries, 0)


def rejection_values_batch(d: int, N: int, T: float, cfg: SamplerConfig,
                           count: int, seed: int, workers: int = 1,
                           antithetic: bool = False):
    """(values, residuals, proposals_used) for `count` accepted loops.

    Sample `idx` consumes only its own substream (seed, idx), so the batch is
    reproducible for any worker count.  With `antithetic`, odd indices are
    negations of the previous accepted sample (negation preserves both the
    bridge law and the residual).
    """
    if antithetic and count % 2:
        raise ValueError("antithetic batches need an even count")
    n_draw = count // 2 if antithetic else count
    block = 128

    def one(idx: int):
        rng = substream(seed, idx)
        tries = 0
        while tries < cfg.max_tries:
            raw = rng.normal(0.0, np.sqrt(T / cfg.m), size=(block, cfg.m, d))
            walks = np.concatenate([np.zeros((block, 1, d)), np.cumsum(raw, axis=1)], axis=1)
            frac = (np.arange(cfg.m + 1) / cfg.m)[None, :, None]
            vals = walks - frac * walks[:, -1:, :]
            vals[:, -1, :] = 0.0
            res = residuals_batch(vals, T, N)
            hits = np.nonzero(res <= cfg.eps)[0]
            if len(hits):
                k = int(hits[0])
                return vals[k], float(res[k]), tries + k + 1
            tries += block
        raise IterationCapError(tries, 0)

    def chunk(lo: int, hi: int) -> np.ndarray:
        out = np.empty((hi - lo, cfg.m + 3, d))
        for idx in range(lo, hi):
            v, r, t = one(idx)
            out[idx - lo, : cfg.m + 1] = v
            out[idx - lo, cfg.m + 1] = r
            out[idx - lo, cfg.m + 2] = t
        return out

    packed = parallel_chunk_map(chunk, n_draw, workers=workers)
    vals = packed[:, : cfg.m + 1, :]
    res = packed[:, cfg.m + 1, 0]
    tries = packed[:, cfg.m + 2, 0]
    if antithetic:
        vals = np.repeat(vals, 2, axis=0)
        vals[1::2] *= -1.0
        res = np.repeat(res, 2)
        tries = np.repeat(tries, 2)
    stats = {
        "proposals": int(tries.sum()),
        "acceptance_rate": float(len(res) / tries.sum()) if tries.sum() else 0.0,
        "residual_mean": float(res.mean()),
        "residual_max": float(res.max()),
    }
    logger.info("rejection batch: %s", stats)
    return vals, res, stats


# ---------------------------------------------------------------------------
# constrained MCMC sampler (workhorse for N >= 2)

class LoopMcmcSampler:
    """pCN Metropolis chain on bridge increments with a soft window constraint.

    The proposal x' = sqrt(1 - rho^2) x + rho xi, with xi fresh centered
    bridge increments, preserves the zero-sum constraint exactly and leaves
    the discrete bridge law invariant, so the Metropolis ratio reduces to the
    soft-constraint factor exp(-r^2 / 2 sigma^2) on the residual r.  sigma is
    annealed geometrically from sigma0 down to eps/2 over the burn-in; the
    chain is ergodic for any sigma > 0.  Emitted states additionally satisfy
    r <= eps.

    The constraint couples every increment, so a single proposal scale mixes
    slowly: the adapted scale shrinks until acceptance is fine but moves are
    tiny.  Each step therefore draws the scale from a two-point mixture, the
    adapted local rho or a full refresh (rho = 1); both components are
    reversible for the bridge prior, so the mixture targets the same law.
    The acceptance-rate diagnostics track the local component.
    """

    ADAPT_EVERY = 50
    TARGET_ACCEPT = 0.3

    def __init__(self, d: int, N: int, T: float, cfg: SamplerConfig,
                 rng: np.random.Generator):
        self.d, self.N, self.T, self.cfg, self.rng = d, N, T, cfg, rng
        self.sigma_final = cfg.eps / 2.0
        # anneal over the first part of burn-in, then let rho settle at the
        # final temperature before adaptation freezes
        self.anneal_steps = int(0.6 * cfg.burnin)
        self.rho = cfg.rho
        self.steps = 0
        self.accepted = 0
        self._window: list[int] = []
        self.diagnostics = {"acceptance_rate": None, "healthy": True, "rho": cfg.rho}
        self._state = self._fresh_increments()
        self._residual = self._residual_of(self._state)

    def _fresh_increments(self) -> np.ndarray:
        raw = self.rng.normal(0.0, np.sqrt(self.T / self.cfg.m), size=(self.cfg.m, self.d))
        return raw - raw.mean(axis=0, keepdims=True)

    def _values(self, inc: np.ndarray) -> np.ndarray:
        vals = np.vstack([np.zeros((1, self.d)), np.cumsum(inc, axis=0)])
        vals[-1] = 0.0
        return vals

    def _residual_of(self, inc: np.ndarray) -> float:
        return float(residuals_batch(self._values(inc)[None], self.T, self.N)[0])

    def _sigma(self) -> float:
        if self.steps >= self.anneal_steps or self.anneal_steps == 0:
            return self.sigma_final
        frac = self.steps / self.anneal_steps
        return self.cfg.sigma0 * (self.sigma_final / self.cfg.sigma0) ** frac

    def step(self) -> bool:
        sigma = self._sigma()
        indep = self.rng.uniform() < self.cfg.indep_prob
        rho = 1.0 if indep else self.rho
        prop = np.sqrt(1.0 - rho**2) * self._state + rho * self._fresh_increments()
        r_prop = self._residual_of(prop)
        log_ratio = (self._residual**2 - r_prop**2) / (2.0 * sigma**2)
        accept = np.log(self.rng.uniform()) < log_ratio
        if accept:
            self._state, self._residual = prop, r_prop
            self.accepted += 1
        if not indep:
            self._window.append(1 if accept else 0)
            if len(self._window) > 500:
                self._window.pop(0)
        self.steps += 1
        # windowed multiplicative adaptation with constant gain, so rho keeps
        # tracking the acceptance rate while the annealing tightens sigma
        if (self.cfg.adapt and self.steps <= self.cfg.burnin
                and self.steps % self.ADAPT_EVERY == 0 and len(self._window) >= 20):
            rate = sum(self._window[-self.ADAPT_EVERY:]) / min(self.ADAPT_EVERY, len(self._window))
            self.rho = float(np.clip(self.rho * np.exp(0.5 * (rate - self.TARGET_ACCEPT)),
                                     1e-3, 0.999))
        return bool(accept)

    def _check_health(self):
        if self.steps <= self.cfg.burnin or len(self._window) < 400:
            return
        rate = sum(self._window) / len(self._window)
        self.diagnostics["acceptance_rate"] = rate
        self.diagnostics["rho"] = self.rho
        healthy = 0.1 <= rate <= 0.6
        if not healthy and self.diagnostics["healthy"]:
            warnings.warn(
                f"loop MCMC acceptance rate {rate:.3f} outside [0.1, 0.6] after adaptation",
                SamplerDiagnosticWarning,
            )
        self.diagnostics["healthy"] = healthy

    def samples(self):
        """Infinite stream of in-window LoopSamples after burn-in and thinning."""
        while self.steps < self.cfg.burnin:
            self.step()
        attempts = 0
        while True:
            for _ in range(self.cfg.thinning):
                self.step()
            self._check_health()
            attempts += self.cfg.thinning
            if attempts > self.cfg.max_tries:
                raise IterationCapError(attempts, 0)
            if self._residual <= self.cfg.eps:
                attempts = 0
                yield LoopSample(from_values(self._values(self._state), T=self.T),
                                 N=self.N, residual=self._residual)


def sample_loop_mcmc(d: int, N: int, T: float, cfg: SamplerConfig,
                     rng: np.random.Generator):
    """Stream of LoopSamples from the pCN chain (see LoopMcmcSampler)."""
    return LoopMcmcSampler(d, N, T, cfg, rng).samples()


def mcmc_values_batch(d: int, N: int, T: float, cfg: SamplerConfig, count: int,
                      seed: int):
    """Collect `count` emitted states of one chain as a (count, m+1, d) array.

    A chain is inherently sequential: determinism comes from the chain's own
    substream, not from per-sample streams.
    """
    sampler = LoopMcmcSampler(d, N, T, cfg, substream(seed, 0))
    stream = sampler.samples()
    vals = np.empty((count, cfg.m + 1, d))
    res = np.empty(count)
    for i in range(count):
        s = next(stream)
        vals[i] = s.path.knots
        res[i] = s.residual
    return vals, res, dict(sampler.diagnostics)
