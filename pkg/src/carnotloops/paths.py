"""Piecewise-linear paths, the common representation for drivers and samples.

A path is a strictly increasing time grid t_0 < ... < t_m together with a
knot in R^d per time.  All signature and flow computations in this package
treat the path as linear between knots.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PiecewiseLinearPath:
    times: np.ndarray  # shape (m+1,)
    knots: np.ndarray  # shape (m+1, d)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim == 1:
            knots = knots[:, None]
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "knots", knots)
        if times.ndim != 1 or knots.ndim != 2 or len(times) != len(knots):
            raise ValueError("times must be (m+1,), knots (m+1, d)")
        if len(times) < 2:
            raise ValueError("a path needs at least one segment")
        if not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def d(self) -> int:
        return self.knots.shape[1]

    @property
    def num_segments(self) -> int:
        return len(self.times) - 1

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def increments(self) -> np.ndarray:
        """Knot-to-knot increments, shape (m, d)."""
        return np.diff(self.knots, axis=0)

    def is_closed(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.knots[-1] - self.knots[0]) <= atol))

    def scaled(self, lam: float) -> "PiecewiseLinearPath":
        """Scale values by lam, keeping the time grid."""
        return PiecewiseLinearPath(self.times.copy(), lam * self.knots)

    def reparameterized(self, new_times: np.ndarray) -> "PiecewiseLinearPath":
        """Replace the time grid (must stay strictly increasing)."""
        return PiecewiseLinearPath(np.asarray(new_times, dtype=float), self.knots.copy())

    def reversed(self) -> "PiecewiseLinearPath":
        t = self.times
        return PiecewiseLinearPath(t[0] + t[-1] - t[::-1], self.knots[::-1].copy())

    def concat(self, other: "PiecewiseLinearPath") -> "PiecewiseLinearPath":
        """Run self, then other translated to start at self's endpoint."""
        if other.d != self.d:
            raise ValueError("dimension mismatch in path concatenation")
        shift_t = self.times[-1] - other.times[0]
        shift_x = self.knots[-1] - other.knots[0]
        times = np.concatenate([self.times, other.times[1:] + shift_t])
        knots = np.concatenate([self.knots, other.knots[1:] + shift_x])
        return PiecewiseLinearPath(times, knots)


def from_values(values: np.ndarray, T: float | None = None,
                times: np.ndarray | None = None) -> PiecewiseLinearPath:
    """Path from a (m+1, d) value array on a uniform grid of length T."""
    values = np.asarray(values, dtype=float)
    if times is None:
        if T is None:
            T = 1.0
        times = np.linspace(0.0, float(T), len(values))
    return PiecewiseLinearPath(times, values)


def read_path_file(filename: str) -> PiecewiseLinearPath:
    """Read the plain-text path format: header ``d m``, then m+1 rows ``t x1 .. xd``."""
    with open(filename, "r", encoding="utf-8") as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{filename}: empty path file")
    try:
        d, m = int(rows[0][0]), int(rows[0][1])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{filename}: bad header, expected 'd m'") from exc
    body = rows[1:]
    if len(body) != m + 1:
        raise ValueError(f"{filename}: expected {m + 1} knot rows, found {len(body)}")
    data = np.array([[float(v) for v in row] for row in body])
    if data.shape[1] != d + 1:
        raise ValueError(f"{filename}: knot rows must have 1 + d = {d + 1} columns")
    return PiecewiseLinearPath(data[:, 0], data[:, 1:])


def write_path_file(filename: str, path: PiecewiseLinearPath) -> None:
    with open(filename, "w", encoding="utf-8") as fh:
        fh.write(f"{path.d} {path.num_segments}\n")
        for t, x in zip(path.times, path.knots):
            fh.write(" ".join([repr(float(t))] + [repr(float(v)) for v in x]) + "\n")
