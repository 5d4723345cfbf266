"""Generate the benchmark families, round-trip them through the text format
and check the brute-force oracle on a small one.

    python demos/instances.py
"""

from isingcbb.model import (
    brute_force_ground,
    energy,
    fix_spin,
    gen_chimera,
    gen_random,
    gen_square,
    gen_triangular,
    instance_digest,
    parse_instance,
    serialize_instance,
)

families = {
    "square 15x15": gen_square(15, 1.5, 1),
    "triangular 6x6": gen_triangular(6, 6, 1.5, 1),
    "chimera L=9": gen_chimera(9, 1.5, 1),
    "random n=30 p=0.2": gen_random(30, 0.2, 1),
}
for name, m in families.items():
    back = parse_instance(serialize_instance(m))
    assert instance_digest(back) == instance_digest(m)
    print(f"{name:20s} n={m.n:4d} couplings={len(m.couplings):5d} "
          f"digest={instance_digest(m)[:16]}")

m = gen_square(3, 1.5, 11)
ground = brute_force_ground(m)
print(f"\n3x3 square, seed 11: ground energy {ground.energy:.6f}")
print("configuration", "".join("+" if s > 0 else "-" for s in ground.configuration))

# fixing a spin yields an (n-1)-spin model whose energies agree with the original
s4 = ground.configuration[4]
reduced = fix_spin(m, 4, s4)
rest = tuple(s for k, s in enumerate(ground.configuration) if k != 4)
print(f"fix spin 4 = {s4:+d}: reduced n={reduced.n}, offset {reduced.offset:.6f}, "
      f"reduced-model energy {energy(reduced, rest):.6f} equals the original")
