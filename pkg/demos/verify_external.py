"""Check a configuration produced elsewhere (here: a short simulated anneal
standing in for an annealing device) against the certified ground state.

    python demos/verify_external.py
"""

import numpy as np

from isingcbb.bnb import solve_cbb, verify_external
from isingcbb.model import gen_chimera


def anneal(model, sweeps, seed):
    """Plain single-spin-flip Metropolis with a geometric temperature ramp."""
    rng = np.random.default_rng(seed)
    nbrs = [[] for _ in range(model.n)]
    for i, j, J in model.couplings:
        nbrs[i].append((j, J))
        nbrs[j].append((i, J))
    h = np.zeros(model.n)
    for i, v in model.fields:
        h[i] = v
    s = rng.choice([-1, 1], size=model.n)
    for T in np.geomspace(5.0, 0.05, sweeps):
        for i in rng.permutation(model.n):
            local = sum(J * s[j] for j, J in nbrs[i])
            delta = 2 * s[i] * (local - h[i])  # energy change of flipping i
            if delta <= 0 or rng.random() < np.exp(-delta / T):
                s[i] = -s[i]
    return tuple(int(x) for x in s)


m = gen_chimera(3, 1.5, 4)
cert = solve_cbb(m)
print(f"chimera L=3 ({m.n} spins): certified ground energy {cert.upper:.6f}, "
      f"converged={cert.converged}, {cert.branchings} branchings")
for sweeps in (5, 50, 500):
    ext = anneal(m, sweeps, seed=sweeps)
    rep = verify_external(m, ext, cert)
    print(f"  anneal {sweeps:4d} sweeps: energy {rep['external_energy']:.6f} "
          f"gap {rep['gap_to_upper']:.6f} ground={rep['is_ground_state']} "
          f"hamming {rep['hamming_distance']} (up to flip {rep['hamming_distance_up_to_flip']})")
