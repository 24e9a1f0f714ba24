"""The free Carnot group in exponential coordinates: group law, dilations,
the left-invariant frame, and path lifts.

Run:  python3 demos/demo_carnot_lift.py
"""

import numpy as np

from carnotloops.carnot import CarnotGroup, heisenberg_roundtrip
from carnotloops.paths import PiecewiseLinearPath

G = CarnotGroup(2, 3)
print(f"G_3(R^2): dimension {G.dim}, basis words "
      f"{[''.join(map(str, w)) for w in G.words]}")
print()

rng = np.random.default_rng(0)
g, h = rng.normal(size=G.dim), rng.normal(size=G.dim)
print("g * h        =", np.round(G.mul(g, h), 6))
print("g * g^-1     =", G.mul(g, G.inverse(g)))
print("dilation 2.0 scales level j by 2^j:", np.round(G.dilate(g, 2.0) / g, 6))
print()

print("left-invariant frame at a generic point (columns D_1, D_2):")
print(np.round(G.frame(g), 6))
print()

square = PiecewiseLinearPath([0, 1, 2, 3, 4],
                             [[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]])
lift = G.lift_path(square)
print("lift of the unit square loop, knot by knot:")
for t, row in zip(square.times, lift):
    print(f"  t={t:.0f}  {np.round(row, 6)}")
print("the loop closes at level 1 but remembers its area at level 2")
print()

H = CarnotGroup(2, 2)
print("Heisenberg matrix picture (step 2): the lift endpoint"
      " exponentiates to")
M = heisenberg_roundtrip(H.lift_path(square)[-1])
print(M.as_array())
