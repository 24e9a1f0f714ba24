"""Signatures of piecewise-linear paths: Chen concatenation, log-signatures,
and the explicit Chen-Strichartz permutation sums.

Run:  python3 demos/demo_signatures.py
"""

import numpy as np

from carnotloops import tensoralg as ta
from carnotloops.paths import PiecewiseLinearPath

square = PiecewiseLinearPath([0, 1, 2, 3, 4],
                             [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])

print("=== the unit square loop ===")
sig = ta.path_signature(square, 2)
print("level 1 (net displacement):", sig.levels[1])
print("level 2 as a 2x2 block:")
print(sig.levels[2].reshape(2, 2))
print("antisymmetric part = enclosed area:",
      0.5 * (sig.get((1, 2)) - sig.get((2, 1))))
print()

series = ta.log_signature(square, 3)
print("Lyndon log-signature:", {("".join(map(str, w))): c
                                for w, c in series.coeffs.items()})
print()

print("=== Chen identity ===")
half1 = PiecewiseLinearPath([0, 1, 2], [[0, 0], [1, 0], [1, 1]])
half2 = PiecewiseLinearPath([2, 3, 4], [[1, 1], [0, 1], [0, 0]])
combined = ta.chen_concat(ta.path_signature(half1, 3), ta.path_signature(half2, 3))
print("max |concat sig - chen product|:",
      ta.path_signature(square, 3).max_abs_diff(combined))
print()

print("=== Chen-Strichartz permutation sums vs the tensor route ===")
rng = np.random.default_rng(42)
path = PiecewiseLinearPath(np.linspace(0, 1, 6), rng.normal(size=(6, 2)))
logsig = ta.log_signature(path, 3)
print(f"{'word':>6} {'permutation sum':>18} {'log-signature':>18}")
for w in [(1,), (2,), (1, 2), (1, 1, 2), (1, 2, 2)]:
    lam = ta.strichartz_lambda(path, w)
    ref = logsig.coeffs.get(w, 0.0)
    print(f"{''.join(map(str, w)):>6} {lam:>18.12f} {ref:>18.12f}")
print()
print("raw per-word sums live on the redundant right-nested family:")
print("  raw lambda(12) =", ta.strichartz_lambda_raw(path, (1, 2)))
print("  raw lambda(21) =", ta.strichartz_lambda_raw(path, (2, 1)))
print("  their bracket-aware combination gives the Lyndon coefficient above")
