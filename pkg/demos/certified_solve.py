"""Certify the ground state of a 12x12 square lattice and print the
lower/upper staircase of the branch and bound.

    python demos/certified_solve.py [L] [seed]
"""

import sys

from isingcbb.bnb import CBBParams, solve_cbb
from isingcbb.model import energy, gen_square

L = int(sys.argv[1]) if len(sys.argv) > 1 else 12
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
m = gen_square(L, 1.5, seed)

for label, params in [("without cuts", CBBParams(trace=True)),
                      ("with triangle cuts", CBBParams(cuts=True, trace=True))]:
    cert = solve_cbb(m, params)
    print(f"{L}x{L} square, seed {seed}, {label}: converged={cert.converged} "
          f"branchings={cert.branchings} nodes={cert.nodes_explored} "
          f"largest block={cert.max_block_size} time={cert.wall_time:.1f}s")
    print(f"  certified interval [{cert.lower:.9f}, {cert.upper:.9f}]")
    assert energy(m, cert.config) == cert.upper
    print(f"  {'step':>5s} {'lower':>14s} {'upper':>14s}")
    for step, lo, up in cert.staircase():
        print(f"  {step:5d} {lo:14.6f} {up:14.6f}")
