"""Tour of the free Lie algebra layer: Lyndon bases, dimensions, brackets,
and the truncated Baker-Campbell-Hausdorff product.

Run:  python3 demos/demo_algebra.py
"""

from fractions import Fraction

from carnotloops import freelie as fl

print("=== Lyndon bases and Witt dimensions ===")
for d, L in ((2, 5), (3, 4)):
    basis = fl.get_basis(d, L)
    dims = [fl.witt_dimension(d, j) for j in range(1, L + 1)]
    print(f"d={d}, step {L}: level dims {dims}, total {basis.dim}")
print()

basis = fl.get_basis(2, 4)
print("basis words for d=2, step 4:")
for el in fl.generate_basis(2, 4):
    print(f"  {''.join(map(str, el.word))}  bracketing {el.bracketing()}")
print()

print("=== brackets through the structure table ===")
e1 = fl.LieSeries.generator(2, 4, 1, coeff=Fraction(1))
e2 = fl.LieSeries.generator(2, 4, 2, coeff=Fraction(1))
b = fl.lie_bracket(e1, e2)
print("[e1, e2] =", b.coeffs)
print("[[e1, e2], e2] =", fl.lie_bracket(b, e2).coeffs)
print()

print("=== Baker-Campbell-Hausdorff, exact rational coefficients ===")
z = fl.bch(e1, e2)
for w in fl.get_basis(2, 4).words:
    c = z.coeffs.get(w, 0)
    if c:
        print(f"  coefficient of {''.join(map(str, w))}: {c}")
print()
print("the 1/12 on 112 and 122 and the -1/24 on 1122 are the classical values")
