"""Lower bounds from the hybrid relaxation and upper bounds by sign rounding."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp
from .chordal import CliqueDecomposition
from .model import SpinModel, energy
from .relaxation import RelaxationProblem, assemble, find_violated_triangles

# one-body moments this close to zero count as exactly zero (sign +1)
SIGN_ZERO_TOL = 1e-7


@dataclass(frozen=True)
class BoundParams:
    n_t: int = 7
    cuts: bool = False
    cut_rounds: int = 10
    cuts_per_round: int = 50
    cut_tol: float = 1e-6
    solver: sdp.SolverOptions = field(default_factory=sdp.SolverOptions)


@dataclass
class BoundResult:
    lower: float
    upper: float
    config: tuple[int, ...]
    solution: sdp.SDPSolution
    problem: RelaxationProblem
    cut_rounds: int = 0
    cuts_added: int = 0


def singleton_moments(problem: RelaxationProblem, y: np.ndarray) -> np.ndarray:
    """<s_i> for every spin, read from the shared one-body variables."""
    idx = [problem.variables[(i,)] for i in range(problem.n)]
    return np.asarray(y, dtype=float)[idx]


def lower_bound(
    model: SpinModel, decomp: CliqueDecomposition, params: BoundParams | None = None
) -> tuple[float, sdp.SDPSolution, RelaxationProblem, int, int]:
    """Certified bound from the hybrid relaxation, optionally tightened by cuts.

    Triangle inequalities are only separated on level-1 blocks (level 2
    implies them).  Returns ``(bound, solution, problem, rounds, cuts_added)``.
    """
    params = params or BoundParams()
    problem = assemble(model, decomp, params.n_t)
    solution = sdp.solve(problem, params.solver)
    best = solution.dual_bound
    rounds = added = 0
    if params.cuts:
        while rounds < params.cut_rounds:
            new = find_violated_triangles(
                problem, solution.y, params.cuts_per_round, params.cut_tol, levels=(1,)
            )
            if not new:
                break
            rounds += 1
            added += len(new)
            problem = problem.with_cuts(new)
            candidate = sdp.solve(problem, params.solver)
            improvement = candidate.dual_bound - best
            if candidate.dual_bound >= best:
                best, solution = candidate.dual_bound, candidate
            if improvement < 1e-6 * (1.0 + abs(best)):
                break
    return best, solution, problem, rounds, added


def extract_configuration(
    problem: RelaxationProblem, y: np.ndarray, zero_tol: float = SIGN_ZERO_TOL
) -> tuple[int, ...]:
    """Spin i is +1 if <s_i> >= 0 (within ``zero_tol`` of 0 counts as 0), else -1."""
    m = singleton_moments(problem, y)
    return tuple(1 if v >= -zero_tol else -1 for v in m)


def upper_bound(
    model: SpinModel, problem: RelaxationProblem, y: np.ndarray
) -> tuple[float, tuple[int, ...]]:
    config = extract_configuration(problem, y)
    return energy(model, config), config


def cholesky_sign_vectors(gamma: np.ndarray, precision: float = 1e-8) -> np.ndarray:
    """Gram vectors of a level-1 moment matrix as columns, rank-reduced.

    ``gamma = V.T @ V`` up to ``precision``; spin j's rounding is then
    sign(V[:, 0] @ V[:, j]).  Used to cross-check the direct sign rule.
    """
    w, U = np.linalg.eigh(gamma)
    keep = w > precision * max(1.0, float(w.max()))
    return (U[:, keep] * np.sqrt(w[keep])).T


def compute_bounds(
    model: SpinModel, decomp: CliqueDecomposition, params: BoundParams | None = None
) -> BoundResult:
    lower, solution, problem, rounds, added = lower_bound(model, decomp, params)
    upper, config = upper_bound(model, problem, solution.y)
    return BoundResult(lower, upper, config, solution, problem, rounds, added)
