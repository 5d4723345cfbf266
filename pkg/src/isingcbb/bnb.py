"""Chordal branch and bound: best-first search over single-spin branchings."""

from __future__ import annotations

import dataclasses
import heapq
import itertools
import json
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import sdp
from .bounds import BoundParams, compute_bounds, singleton_moments
from .chordal import decompose, dense_decomposition
from .model import (
    ContractViolation,
    SpinModel,
    brute_force_ground,
    check_configuration,
    energy,
    fix_spin,
    instance_digest,
)

log = logging.getLogger(__name__)

EASY_FIRST = "easy_first"
HARD_FIRST = "hard_first"


class VerificationRefused(ValueError):
    """The supplied certificate does not belong to the supplied instance."""


@dataclass(frozen=True)
class CBBParams:
    """Every knob of a run; echoed verbatim into the certificate."""

    n_t: int = 7
    branch_rule: str = EASY_FIRST
    chordal: bool = True
    cuts: bool = False
    cut_rounds: int = 10
    cuts_per_round: int = 50
    cut_tol: float = 1e-6
    feas_tol: float = 1e-9
    gap_tol: float = 1e-8
    max_iter: int = 200
    gap_tolerance: float = 1e-6
    max_nodes: int = 10_000
    time_limit: float | None = None
    oracle_leaf: int = 16
    trace: bool = False

    def __post_init__(self):
        if self.branch_rule not in (EASY_FIRST, HARD_FIRST):
            raise ContractViolation(f"unknown branch rule {self.branch_rule!r}")
        if self.n_t < 0 or self.max_nodes < 1 or self.oracle_leaf < 0:
            raise ContractViolation("n_t, max_nodes and oracle_leaf must be non-negative")
        if self.oracle_leaf > 20:
            raise ContractViolation("oracle_leaf is capped at 20 spins")
        if not (self.gap_tolerance >= 0 and self.feas_tol > 0 and self.gap_tol > 0):
            raise ContractViolation("tolerances must be positive")

    def bound_params(self) -> BoundParams:
        return BoundParams(
            n_t=self.n_t,
            cuts=self.cuts,
            cut_rounds=self.cut_rounds,
            cuts_per_round=self.cuts_per_round,
            cut_tol=self.cut_tol,
            solver=sdp.SolverOptions(self.feas_tol, self.gap_tol, self.max_iter),
        )

    def tolerance(self, upper: float) -> float:
        return self.gap_tolerance * (1.0 + abs(upper))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BBNode:
    assignment: dict[int, int]
    reduced: SpinModel
    lower: float
    upper: float = math.inf
    local_config: tuple[int, ...] = ()
    moments: np.ndarray | None = field(default=None, repr=False)
    depth: int = 0
    exact: bool = False
    # bound as computed at this node, before inheriting the parent's
    own_lower: float = -math.inf
    trace_id: int = -1

    def full_config(self, n: int) -> tuple[int, ...]:
        spins = [0] * n
        for k, s in self.assignment.items():
            spins[k] = s
        for local, s in zip(self.reduced.labels, self.local_config):
            spins[local] = s
        return tuple(spins)


@dataclass
class Certificate:
    instance_digest: str
    lower: float
    upper: float
    gap: float
    config: tuple[int, ...]
    converged: bool
    nodes_explored: int
    branchings: int
    max_block_size: int
    wall_time: float
    params: dict
    trace: list[dict] | None = None

    def to_dict(self, include_trace: bool = True) -> dict:
        out = dataclasses.asdict(self)
        out["config"] = list(self.config)
        if not include_trace or self.trace is None:
            out.pop("trace")
        return out

    def to_json(self, include_trace: bool = True) -> str:
        return json.dumps(self.to_dict(include_trace), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> Certificate:
        kwargs = {f.name: data.get(f.name) for f in dataclasses.fields(cls)}
        kwargs["config"] = tuple(int(s) for s in data["config"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> Certificate:
        return cls.from_dict(json.loads(text))

    def staircase(self) -> list[tuple[int, float, float]]:
        """(branching step, global lower, incumbent) after every step."""
        if not self.trace:
            return []
        rows = []
        for entry in self.trace:
            row = (entry["step"], entry["global_lower"], entry["incumbent"])
            if rows and rows[-1][0] == row[0]:
                rows[-1] = row
            else:
                rows.append(row)
        return rows


def select_branch_spin(
    moments: Sequence[float] | Mapping[int, float], unfixed: Iterable[int], rule: str = EASY_FIRST
) -> int:
    """Spin with the largest |<s_i>| (easy first) or the smallest (hard first).

    Ties go to the smallest index.
    """
    candidates = sorted(set(unfixed))
    if not candidates:
        raise ContractViolation("no unfixed spin left to branch on")
    if rule == EASY_FIRST:
        return min(candidates, key=lambda i: (-abs(moments[i]), i))
    if rule == HARD_FIRST:
        return min(candidates, key=lambda i: (abs(moments[i]), i))
    raise ContractViolation(f"unknown branch rule {rule!r}")


class _Search:
    def __init__(self, model: SpinModel, params: CBBParams):
        self.model = model
        self.params = params
        self.bound_params = params.bound_params()
        self.max_block = 0
        self.solves = 0
        self._lock = threading.Lock()

    def evaluate(self, reduced: SpinModel, assignment: dict[int, int], depth: int,
                 cutoff: float | None) -> BBNode:
        node = BBNode(dict(assignment), reduced, -math.inf, depth=depth)
        if reduced.n == 0 or reduced.n <= self.params.oracle_leaf:
            result = brute_force_ground(reduced)
            node.lower = node.upper = node.own_lower = result.energy
            node.local_config = result.configuration
            node.exact = True
            return node
        decomp = decompose(reduced) if self.params.chordal else dense_decomposition(reduced.n)
        bp = self.bound_params
        if cutoff is not None:
            bp = dataclasses.replace(bp, solver=dataclasses.replace(bp.solver, cutoff=cutoff))
        res = compute_bounds(reduced, decomp, bp)
        if res.solution.status == sdp.NUMERICAL_TROUBLE:
            log.warning("numerical trouble at depth %d, retrying with tighter tolerances", depth)
            retry = compute_bounds(
                reduced, decomp, dataclasses.replace(bp, solver=bp.solver.tightened())
            )
            if retry.lower >= res.lower:
                res = retry
        with self._lock:
            self.solves += 1
            self.max_block = max(self.max_block, res.problem.max_block_size)
        node.lower = node.own_lower = res.lower
        node.upper = res.upper
        node.local_config = res.config
        node.moments = singleton_moments(res.problem, res.solution.y)
        return node


def solve_cbb(model: SpinModel, params: CBBParams | None = None, jobs: int = 1) -> Certificate:
    """Certified ground state by chordal branch and bound.

    Nodes are expanded best-first by lower bound (FIFO among equal bounds).
    A node is discarded once its lower bound reaches the incumbent minus the
    gap tolerance; the run has converged when no open node remains below
    that level.  Budgets end the run early with a still-valid bracket.

    With ``jobs > 1`` the two children of a branching are bounded in
    parallel threads; results are identical to the serial run.
    """
    params = params or CBBParams()
    if jobs < 1:
        raise ContractViolation("jobs must be at least 1")
    pool = ThreadPoolExecutor(max_workers=min(jobs, 2)) if jobs > 1 else None
    try:
        return _run(model, params, pool)
    finally:
        if pool is not None:
            pool.shutdown()


def _run(model: SpinModel, params: CBBParams, pool: ThreadPoolExecutor | None) -> Certificate:
    start = time.perf_counter()
    search = _Search(model, params)
    n = model.n
    root = search.evaluate(model, {}, 0, None)
    incumbent = root.upper
    best_config = root.full_config(n)
    counter = itertools.count()
    heap: list[tuple[float, int, BBNode]] = []
    closed_lower = math.inf
    if root.exact or root.lower >= incumbent - params.tolerance(incumbent):
        closed_lower = root.lower
    else:
        heapq.heappush(heap, (root.lower, next(counter), root))
    nodes = 1
    branchings = 0
    trace: list[dict] = []

    def global_lower() -> float:
        open_min = heap[0][0] if heap else math.inf
        return min(incumbent, closed_lower, open_min)

    def record(node: BBNode, parent: BBNode | None) -> None:
        if params.trace:
            node.trace_id = len(trace)
            trace.append({
                "step": branchings,
                "parent": -1 if parent is None else parent.trace_id,
                "depth": node.depth,
                "node_bound": node.own_lower,
                "node_lower": node.lower,
                "node_upper": node.upper,
                "global_lower": global_lower(),
                "incumbent": incumbent,
            })

    record(root, None)
    while heap:
        if global_lower() >= incumbent - params.tolerance(incumbent):
            break
        if nodes >= params.max_nodes:
            break
        if params.time_limit is not None and time.perf_counter() - start >= params.time_limit:
            break
        lower, _, node = heapq.heappop(heap)
        if lower >= incumbent - params.tolerance(incumbent):
            closed_lower = min(closed_lower, lower)
            continue
        local = select_branch_spin(node.moments, range(node.reduced.n), params.branch_rule)
        label = node.reduced.labels[local]
        first = 1 if node.moments[local] >= 0 else -1
        branchings += 1
        # both children see the incumbent as it was before the branching, so
        # serial and concurrent evaluation give identical bounds
        cutoff = incumbent - params.tolerance(incumbent)
        jobs = []
        for s in (first, -first):
            assignment = dict(node.assignment)
            assignment[label] = s
            jobs.append((fix_spin(node.reduced, local, s), assignment, node.depth + 1, cutoff))
        if pool is None:
            children = [search.evaluate(*job) for job in jobs]
        else:
            children = list(pool.map(lambda job: search.evaluate(*job), jobs))
        for child in children:
            nodes += 1
            # the parent's bound holds on every subtree
            child.lower = max(child.lower, node.lower)
            if child.upper < incumbent:
                incumbent = child.upper
                best_config = child.full_config(n)
            if child.exact or child.lower >= incumbent - params.tolerance(incumbent):
                closed_lower = min(closed_lower, child.lower)
            else:
                heapq.heappush(heap, (child.lower, next(counter), child))
            record(child, node)
        if params.trace is False and log.isEnabledFor(logging.INFO):
            log.info("step %d: lower %.10g upper %.10g open %d",
                     branchings, global_lower(), incumbent, len(heap))

    lower = global_lower()
    upper = energy(model, best_config)
    gap = upper - lower
    return Certificate(
        instance_digest=instance_digest(model),
        lower=lower,
        upper=upper,
        gap=gap,
        config=best_config,
        converged=gap <= params.tolerance(upper),
        nodes_explored=nodes,
        branchings=branchings,
        max_block_size=search.max_block,
        wall_time=time.perf_counter() - start,
        params=params.to_dict(),
        trace=trace if params.trace else None,
    )


def verify_external(
    model: SpinModel,
    external_config: Sequence[int],
    certificate: Certificate | None = None,
    params: CBBParams | None = None,
) -> dict:
    """Compare an externally found configuration with the certified ground state."""
    config = check_configuration(model, external_config)
    if certificate is None:
        certificate = solve_cbb(model, params)
    elif certificate.instance_digest != instance_digest(model):
        raise VerificationRefused("certificate digest does not match the instance")
    ext = energy(model, config)
    distance = sum(a != b for a, b in zip(config, certificate.config))
    return {
        "instance_digest": certificate.instance_digest,
        "external_energy": ext,
        "certified_lower": certificate.lower,
        "certified_upper": certificate.upper,
        "certified_converged": certificate.converged,
        "gap_to_upper": ext - certificate.upper,
        "gap_to_lower": ext - certificate.lower,
        "is_ground_state": certificate.converged
        and ext <= certificate.upper + 1e-9 * (1 + abs(certificate.upper)),
        "hamming_distance": distance,
        "hamming_distance_up_to_flip": min(distance, model.n - distance),
        "certified_config": list(certificate.config),
    }
