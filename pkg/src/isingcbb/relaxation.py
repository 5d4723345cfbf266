"""Clique-wise moment relaxations of the Ising ground-state problem.

Every clique of a chordal extension gets a moment matrix indexed by a
monomial basis (level 1: the constant and the clique's spins; level 2: also
every pair).  Entry (a, b) holds the expectation of the product of basis
monomials a and b.  Because s_i^2 = 1 and spins commute, that product is the
symmetric difference of the two index sets; all entries with the same product
share one variable, and a monomial appearing in several cliques is the same
variable in every block.  This realises both the intra-block identities and
the inter-block consistency conditions without explicit equality rows.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .chordal import CliqueDecomposition
from .model import ContractViolation, SpinModel

Monomial = tuple[int, ...]
CONSTANT: Monomial = ()


def canonical_product(a: Iterable[int], b: Iterable[int]) -> Monomial:
    return tuple(sorted(set(a) ^ set(b)))


@dataclass(frozen=True)
class MomentBasis:
    clique: tuple[int, ...]
    level: int
    monomials: tuple[Monomial, ...]

    def __len__(self) -> int:
        return len(self.monomials)


def _local_basis(size: int, level: int) -> list[Monomial]:
    if level not in (1, 2):
        raise ContractViolation(f"hierarchy level must be 1 or 2, got {level}")
    basis: list[Monomial] = [CONSTANT] + [(k,) for k in range(size)]
    if level == 2:
        basis += list(itertools.combinations(range(size), 2))
    return basis


def build_basis(clique: Sequence[int], level: int) -> MomentBasis:
    clique = tuple(sorted(int(v) for v in clique))
    local = _local_basis(len(clique), level)
    return MomentBasis(clique, level, tuple(tuple(clique[k] for k in m) for m in local))


@dataclass(frozen=True, eq=False)
class BlockTemplate:
    """Structure shared by every block with the same clique size and level.

    ``local_index[a, b]`` is the local monomial id of entry (a, b), id 0
    being the constant.  ``pos_a, pos_b`` list the strictly upper-triangular
    entries, ``pos_var`` their local ids and ``aggregate`` is the 0/1 matrix
    summing per-entry quantities into per-monomial ones (columns exclude the
    constant).  When every monomial owns exactly one entry pair the
    aggregation is the identity and ``identity_aggregate`` is set.
    """

    size: int
    level: int
    local_monomials: tuple[Monomial, ...]
    local_index: np.ndarray = field(repr=False)
    pos_a: np.ndarray = field(repr=False)
    pos_b: np.ndarray = field(repr=False)
    pos_var: np.ndarray = field(repr=False)
    aggregate: np.ndarray = field(repr=False)
    identity_aggregate: bool

    @property
    def patterns(self) -> np.ndarray:
        """(nloc - 1, dim, dim) symmetric 0/1 pattern of each non-constant monomial."""
        return _patterns(self.size, self.level)

    @property
    def dim(self) -> int:
        return len(self.local_index)


@lru_cache(maxsize=None)
def block_template(size: int, level: int) -> BlockTemplate:
    basis = _local_basis(size, level)
    s = len(basis)
    ids: dict[Monomial, int] = {CONSTANT: 0}
    index = np.zeros((s, s), dtype=np.int64)
    pa, pb, pv = [], [], []
    for a in range(s):
        for b in range(a + 1, s):
            mono = canonical_product(basis[a], basis[b])
            k = ids.setdefault(mono, len(ids))
            index[a, b] = index[b, a] = k
            pa.append(a)
            pb.append(b)
            pv.append(k)
    pos_var = np.array(pv, dtype=np.int64)
    nloc = len(ids)
    agg = np.zeros((len(pv), nloc - 1))
    agg[np.arange(len(pv)), pos_var - 1] = 1.0
    identity = len(pv) == nloc - 1 and bool(np.all(pos_var == np.arange(1, nloc)))
    monos = tuple(sorted(ids, key=ids.__getitem__))
    for arr in (index, pos_var, agg):
        arr.setflags(write=False)
    return BlockTemplate(
        size=size,
        level=level,
        local_monomials=monos,
        local_index=index,
        pos_a=np.array(pa, dtype=np.int64),
        pos_b=np.array(pb, dtype=np.int64),
        pos_var=pos_var,
        aggregate=agg,
        identity_aggregate=identity,
    )


@lru_cache(maxsize=None)
def _patterns(size: int, level: int) -> np.ndarray:
    tpl = block_template(size, level)
    k = len(tpl.local_monomials) - 1
    F = np.zeros((k, tpl.dim, tpl.dim))
    F[tpl.pos_var - 1, tpl.pos_a, tpl.pos_b] = 1.0
    F[tpl.pos_var - 1, tpl.pos_b, tpl.pos_a] = 1.0
    F.setflags(write=False)
    return F


@dataclass(frozen=True, eq=False)
class Block:
    """One clique's moment matrix; ``var_ids`` maps local monomial ids to variables."""

    clique: tuple[int, ...]
    level: int
    template: BlockTemplate
    var_ids: np.ndarray = field(repr=False)

    @property
    def basis(self) -> MomentBasis:
        return build_basis(self.clique, self.level)

    @property
    def index(self) -> np.ndarray:
        """Variable index of every matrix entry (0 on the diagonal)."""
        return self.var_ids[self.template.local_index]

    @property
    def dim(self) -> int:
        return self.template.dim


@dataclass(frozen=True)
class LinearCut:
    """The inequality ``sum(coeffs[k] * y[variables[k]]) >= lower``."""

    variables: tuple[int, ...]
    coeffs: tuple[float, ...]
    lower: float = -1.0
    violation: float = field(default=0.0, compare=False)

    def value(self, y: np.ndarray) -> float:
        return float(sum(c * y[v] for c, v in zip(self.coeffs, self.variables)))


@dataclass(frozen=True, eq=False)
class RelaxationProblem:
    """Assembled relaxation: minimise ``objective @ y`` with ``y[0] = 1``."""

    n: int
    monomials: tuple[Monomial, ...]
    variables: dict[Monomial, int] = field(repr=False)
    blocks: tuple[Block, ...]
    objective: np.ndarray = field(repr=False)
    cuts: tuple[LinearCut, ...] = ()

    @property
    def num_variables(self) -> int:
        return len(self.monomials)

    @property
    def max_block_size(self) -> int:
        return max((b.dim for b in self.blocks), default=0)

    def with_cuts(self, cuts: Iterable[LinearCut]) -> RelaxationProblem:
        merged = list(self.cuts)
        present = {(c.variables, c.coeffs) for c in merged}
        for c in cuts:
            if (c.variables, c.coeffs) not in present:
                merged.append(c)
                present.add((c.variables, c.coeffs))
        return RelaxationProblem(
            self.n, self.monomials, self.variables, self.blocks, self.objective, tuple(merged)
        )

    def export_text(self) -> str:
        """Sparse text dump for differential testing."""
        out = [f"variables {self.num_variables}"]
        out += [" ".join(map(str, m)) if m else "1" for m in self.monomials]
        out.append(f"blocks {len(self.blocks)}")
        for b in self.blocks:
            out.append(f"block {b.dim} level {b.level} clique " + " ".join(map(str, b.clique)))
            out += [" ".join(map(str, row)) for row in b.index]
        nz = np.nonzero(self.objective)[0]
        out.append(f"objective {len(nz)}")
        out += [f"{k} {self.objective[k]!r}" for k in nz]
        out.append(f"cuts {len(self.cuts)}")
        for c in self.cuts:
            terms = " ".join(f"{v}:{a:g}" for v, a in zip(c.variables, c.coeffs))
            out.append(f"{terms} >= {c.lower!r}")
        return "\n".join(out) + "\n"


def clique_level(size: int, n_t: int) -> int:
    return 2 if size < n_t else 1


def assemble(
    model: SpinModel,
    decomp: CliqueDecomposition,
    n_t: int = 7,
    cuts: Sequence[LinearCut] = (),
) -> RelaxationProblem:
    """Hybrid relaxation: cliques with fewer than ``n_t`` spins use level 2."""
    if decomp.n != model.n:
        raise ContractViolation("decomposition and model disagree on the spin count")
    staged = []
    seen: set[Monomial] = {CONSTANT}
    for clique in decomp.cliques:
        level = clique_level(len(clique), n_t)
        tpl = block_template(len(clique), level)
        glob = [tuple(clique[k] for k in m) for m in tpl.local_monomials]
        seen.update(glob)
        staged.append((tuple(clique), level, tpl, glob))
    monomials = tuple(sorted(seen, key=lambda m: (len(m), m)))
    variables = {m: k for k, m in enumerate(monomials)}
    blocks = []
    for clique, level, tpl, glob in staged:
        ids = np.array([variables[m] for m in glob], dtype=np.int64)
        ids.setflags(write=False)
        blocks.append(Block(clique, level, tpl, ids))

    c = np.zeros(len(monomials))
    c[0] = model.offset
    for i, j, J in model.couplings:
        k = variables.get((i, j))
        if k is None:
            raise AssertionError(f"coupling ({i}, {j}) is not covered by any clique")
        c[k] -= J
    for i, h in model.fields:
        k = variables.get((i,))
        if k is None:
            raise AssertionError(f"spin {i} is not covered by any clique")
        c[k] += h
    c.setflags(write=False)
    return RelaxationProblem(model.n, monomials, variables, tuple(blocks), c, tuple(cuts))


def moment_vector(problem: RelaxationProblem, config: Sequence[int]) -> np.ndarray:
    """Moments of the point distribution on ``config``: y_m = prod_{i in m} s_i."""
    s = np.asarray(config, dtype=float)
    return np.array([np.prod(s[list(m)]) if m else 1.0 for m in problem.monomials])


def block_matrix(block: Block, y: np.ndarray) -> np.ndarray:
    return np.asarray(y)[block.index]


TRIANGLE_SIGNS = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))


def triangle_cuts(problem: RelaxationProblem, i: int, j: int, k: int) -> list[LinearCut]:
    vij = problem.variables[(i, j)]
    vik = problem.variables[(i, k)]
    vjk = problem.variables[(j, k)]
    return [
        LinearCut((vij, vik, vjk), tuple(float(x) for x in signs), -1.0)
        for signs in TRIANGLE_SIGNS
    ]


def find_violated_triangles(
    problem: RelaxationProblem,
    y: np.ndarray,
    max_new: int = 50,
    tol: float = 1e-6,
    levels: Iterable[int] = (1, 2),
) -> list[LinearCut]:
    """Most violated triangle inequalities among triples sharing a clique.

    Cuts already in ``problem`` are skipped.  Returned cuts carry their
    violation and are sorted by it, largest first (ties in triple order).
    """
    levels = set(levels)
    y = np.asarray(y, dtype=float)
    present = {(c.variables, c.coeffs) for c in problem.cuts}
    triples = []
    for block in problem.blocks:
        size = len(block.clique)
        if block.level in levels and size >= 3:
            # local rows 1..size of the moment matrix are the clique's spins
            p, q, r = np.array(list(itertools.combinations(range(1, size + 1), 3))).T
            idx = block.index
            triples.append(np.stack([idx[p, q], idx[p, r], idx[q, r]], axis=1))
    if not triples:
        return []
    # pair variables are numbered lexicographically, so sorting the id
    # triples sorts the spin triples
    ids = np.unique(np.concatenate(triples), axis=0)
    signs = np.array(TRIANGLE_SIGNS, dtype=float)
    values = y[ids] @ signs.T  # (ntriples, 4)
    violation = -1.0 - values
    t_idx, s_idx = np.nonzero(violation > tol)
    order = np.lexsort((s_idx, t_idx, -violation[t_idx, s_idx]))
    found = []
    for k in order:
        t, s = t_idx[k], s_idx[k]
        variables = tuple(int(v) for v in ids[t])
        coeffs = tuple(float(x) for x in signs[s])
        if (variables, coeffs) in present:
            continue
        found.append(LinearCut(variables, coeffs, -1.0, violation=float(violation[t, s])))
        if len(found) == max_new:
            break
    return found
