"""Lower bounds from the moment relaxation at level 1, hybrid levels and
level 2, with and without triangle cuts.

    python demos/relaxation_hierarchy.py
"""

from isingcbb.bounds import BoundParams, compute_bounds
from isingcbb.chordal import decompose
from isingcbb.model import SpinModel, brute_force_ground, gen_square

triangle = SpinModel(3, ((0, 1, -1.0), (0, 2, -1.0), (1, 2, -1.0)))
d = decompose(triangle)
print("antiferromagnetic triangle, exact ground energy", brute_force_ground(triangle).energy)
for label, params in [("level 1", BoundParams(n_t=0)),
                      ("level 1 + cuts", BoundParams(n_t=0, cuts=True)),
                      ("level 2", BoundParams(n_t=7))]:
    print(f"  {label:15s} lower bound {compute_bounds(triangle, d, params).lower:+.6f}")

m = gen_square(4, 1.5, 3)
e = brute_force_ground(m).energy
d = decompose(m)
print(f"\n4x4 square, sigma 1.5: exact {e:.6f}")
print(f"  {'setting':22s} {'lower':>11s} {'upper':>11s} {'gap %':>7s} {'block':>5s}")
for n_t in (0, 3, 4, 5, 7):
    for cuts in (False, True):
        r = compute_bounds(m, d, BoundParams(n_t=n_t, cuts=cuts))
        gap = 100 * (r.upper - r.lower) / abs(r.upper)
        largest = max(b.dim for b in r.problem.blocks)
        label = f"n_t={n_t}" + (" + cuts" if cuts else "")
        print(f"  {label:22s} {r.lower:11.6f} {r.upper:11.6f} {gap:7.3f} {largest:5d}")
