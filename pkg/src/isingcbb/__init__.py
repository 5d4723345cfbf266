"""Certified Ising ground states by chordal branch and bound.

The pieces, bottom up:

* :mod:`isingcbb.model` -- spin models, energies, generators, the text
  instance format and an exhaustive-search oracle;
* :mod:`isingcbb.chordal` -- dependency graphs, chordal extensions and
  maximal cliques;
* :mod:`isingcbb.relaxation` -- clique-wise moment relaxations;
* :mod:`isingcbb.sdp` -- a primal-dual interior-point solver returning
  certified lower bounds;
* :mod:`isingcbb.bounds` -- lower bounds and sign-rounded upper bounds;
* :mod:`isingcbb.bnb` -- the branch-and-bound driver and certificates.
"""

from .bnb import (
    BBNode,
    CBBParams,
    Certificate,
    VerificationRefused,
    select_branch_spin,
    solve_cbb,
    verify_external,
)
from .bounds import BoundParams, compute_bounds, extract_configuration, lower_bound, upper_bound
from .chordal import (
    CliqueDecomposition,
    DependencyGraph,
    chordal_extension,
    decompose,
    dense_decomposition,
    dependency_graph,
    is_chordal,
    maximal_cliques,
)
from .model import (
    ContractViolation,
    InstanceFormatError,
    ProblemTooLarge,
    SpinModel,
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
from .relaxation import assemble
from .sdp import SolverOptions, solve

__version__ = "0.1.0"
