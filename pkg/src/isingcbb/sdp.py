"""Primal-dual interior-point solver for block-diagonal moment relaxations.

The problem solved is

    minimise    c @ y            (y[0] = 1 is the constant monomial)
    subject to  S_l(y) = sum_k y_k F_lk  is PSD for every block l,
                s_c(y) = -lower_c + a_c @ y >= 0 for every cut c,

where F_l0 = I and F_lk is the 0/1 pattern of variable k in block l.  Its
conic dual is

    maximise    c_0 - sum_l tr(Z_l) + sum_c lower_c z_c
    subject to  sum_l <F_lk, Z_l> + sum_c a_ck z_c = c_k   (k >= 1),
                Z_l PSD, z >= 0.

The moment side has the strictly feasible point y = 0 (every S_l = I), so the
iteration keeps y feasible and only the dual equality residual has to be
driven to zero.  Search directions are HKM with a Mehrotra predictor-corrector
step; the Schur complement is assembled block by block (blocks of equal
clique size and level share one index template and are processed as a stack)
and factorised with a sparse LU or a dense Cholesky.

Lower bounds are certified from the dual side.  Any Z can be made to satisfy
the equality constraints exactly by spreading each residual evenly over the
entries of its variable (the patterns of distinct variables are disjoint, so
this is an orthogonal projection).  For feasible y the diagonals of S_l are 1
and |a_c @ y| <= sum |a_c|, hence <S_l, Z'_l> >= tr(S_l) * min(0, lmin(Z'_l))
and the projected dual objective plus these eigenvalue corrections is a valid
lower bound on the relaxation optimum whatever the solver state.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

try:
    import cvxopt
    from cvxopt import cholmod

    cholmod.options["supernodal"] = 2
except ImportError:  # pragma: no cover - sparse LU fallback
    cvxopt = cholmod = None

from .model import ContractViolation
from .relaxation import RelaxationProblem

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
MAX_ITERATIONS = "max_iterations"
NUMERICAL_TROUBLE = "numerical_trouble"
CUTOFF = "cutoff"

# Schur complements up to this order are factorised densely
DENSE_SCHUR_LIMIT = 1500
# largest (blocks x dim^4) handled by the Kronecker form of the Schur assembly
KRON_LIMIT = 4_000_000


@dataclass(frozen=True)
class SolverOptions:
    feas_tol: float = 1e-9
    gap_tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    # stop as soon as the certified bound reaches this value
    cutoff: float | None = None

    def tightened(self) -> SolverOptions:
        return SolverOptions(
            self.feas_tol * 0.01, self.gap_tol * 0.01, self.max_iter * 2, self.verbose, self.cutoff
        )


@dataclass
class SDPSolution:
    y: np.ndarray
    block_matrices: list[np.ndarray] = field(repr=False)
    primal_objective: float
    dual_bound: float
    status: str
    residuals: dict[str, float]
    iterations: int
    dual_objective: float = math.nan

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class _Group:
    template: object
    blocks: list[int]
    var_ids: np.ndarray  # (nb, nloc) global ids of the local monomials
    index: np.ndarray  # (nb, s, s) global id of each entry
    free_ids: np.ndarray  # (nb, nloc - 1) ids minus one (variable 0 is pinned)


class _Layout:
    """Index bookkeeping shared by every iteration of one solve."""

    def __init__(self, problem: RelaxationProblem):
        self.m = problem.num_variables
        by_key: dict[tuple[int, int], list[int]] = {}
        for k, block in enumerate(problem.blocks):
            by_key.setdefault((len(block.clique), block.level), []).append(k)
        self.groups: list[_Group] = []
        for key in sorted(by_key):
            members = by_key[key]
            tpl = problem.blocks[members[0]].template
            var_ids = np.stack([problem.blocks[k].var_ids for k in members])
            self.groups.append(
                _Group(tpl, members, var_ids, var_ids[:, tpl.local_index], var_ids[:, 1:] - 1)
            )
        self.nblocks = len(problem.blocks)
        self.total_dim = sum(len(g.blocks) * g.template.dim for g in self.groups)

        ncut = len(problem.cuts)
        self.ncut = ncut
        rows, cols, vals = [], [], []
        for r, cut in enumerate(problem.cuts):
            for v, a in zip(cut.variables, cut.coeffs):
                if v <= 0 or v >= self.m:
                    raise ContractViolation(f"cut references invalid variable {v}")
                rows.append(r)
                cols.append(v)
                vals.append(a)
        self.cut_matrix = scipy.sparse.csr_matrix(
            (vals, (rows, cols)), shape=(ncut, self.m)
        )
        self.cut_const = np.array([-c.lower for c in problem.cuts], dtype=float)
        self.cut_smax = self.cut_const + np.array(
            [sum(abs(a) for a in c.coeffs) for c in problem.cuts], dtype=float
        )
        if ncut and np.any(self.cut_const <= 0):
            raise ContractViolation("cuts must be strictly satisfied at y = 0 (lower < 0)")

        # entry-pair count per variable, used by the residual projection
        count = np.zeros(self.m)
        for g in self.groups:
            count += np.bincount(
                g.var_ids[:, g.template.pos_var].ravel(), minlength=self.m
            )
        if np.any(count[1:] == 0):
            raise ContractViolation("every variable must occur in some block")
        self.entry_count = count
        self._schur_pattern()

    def _schur_pattern(self) -> None:
        n = self.m - 1
        keys = []
        for g in self.groups:
            ids = g.free_ids
            nloc = ids.shape[1]
            rows = np.repeat(ids, nloc, axis=1).ravel()
            cols = np.tile(ids, (1, nloc)).ravel()
            keys.append(rows * n + cols)
        # (cut, entry, entry) triples of every outer-product term, row-major
        pr, pi, pj = [], [], []
        for r, cut in enumerate(self.cut_matrix_rows()):
            v = np.asarray(cut, dtype=np.int64) - 1
            keys.append((v[:, None] * n + v[None, :]).ravel())
            pos = np.arange(self.cut_matrix.indptr[r], self.cut_matrix.indptr[r + 1])
            pr.append(np.full(len(pos) ** 2, r))
            pi.append(np.repeat(pos, len(pos)))
            pj.append(np.tile(pos, len(pos)))
        if pr:
            self._cut_terms = tuple(np.concatenate(x) for x in (pr, pi, pj))
        keys = np.concatenate(keys) if keys else np.zeros(0, dtype=np.int64)
        uniq, self._scatter = np.unique(keys, return_inverse=True)
        self._nnz = len(uniq)
        rows, cols = np.divmod(uniq, n) if n else (uniq, uniq)
        self._indptr = np.searchsorted(rows, np.arange(n + 1)).astype(np.int64)
        self._indices = cols.astype(np.int64)
        self._rows = rows.astype(np.int64)

    def cut_matrix_rows(self):
        for r in range(self.ncut):
            lo, hi = self.cut_matrix.indptr[r], self.cut_matrix.indptr[r + 1]
            yield self.cut_matrix.indices[lo:hi]

    # --- linear maps -------------------------------------------------------

    def matrices(self, v: np.ndarray) -> list[np.ndarray]:
        return [v[g.index] for g in self.groups]

    def adjoint(self, mats: list[np.ndarray]) -> np.ndarray:
        """Vector of <F_k, X> over all blocks (X need not be symmetric)."""
        out = np.zeros(self.m)
        for g, X in zip(self.groups, mats):
            tpl = g.template
            vals = X[:, tpl.pos_a, tpl.pos_b] + X[:, tpl.pos_b, tpl.pos_a]
            ids = g.var_ids[:, tpl.pos_var]
            out += np.bincount(ids.ravel(), vals.ravel(), minlength=self.m)
        return out

    def schur(self, Zs: list[np.ndarray], Ws: list[np.ndarray], zc, sc):
        """M[k, j] = sum_l tr(F_lk Z_l F_lj W_l) + sum_c a_ck a_cj z_c / s_c, k, j >= 1."""
        vals = []
        for g, Z, W in zip(self.groups, Zs, Ws):
            tpl = g.template
            if tpl.identity_aggregate and Z.shape[0] * tpl.dim**4 <= KRON_LIMIT:
                # K[(a,b),(c,d)] = Z_ac W_bd, symmetrised over a<->b and c<->d
                s = tpl.dim
                K = (Z[:, :, None, :, None] * W[:, None, :, None, :]).reshape(-1, s * s, s * s)
                ab = tpl.pos_a * s + tpl.pos_b
                ba = tpl.pos_b * s + tpl.pos_a
                R = K[:, ab] + K[:, ba]
                Q = R[:, :, ab] + R[:, :, ba]
            elif tpl.identity_aggregate:
                # one entry pair per monomial: expand tr(F_k Z F_j W) entrywise
                A, B = tpl.pos_a, tpl.pos_b
                Ac, Ar = A[:, None], A[None, :]
                Bc, Br = B[:, None], B[None, :]
                Q = Z[:, Bc, Ar] * W[:, Br, Ac]
                Q += Z[:, Bc, Br] * W[:, Ar, Ac]
                Q += Z[:, Ac, Ar] * W[:, Br, Bc]
                Q += Z[:, Ac, Br] * W[:, Ar, Bc]
            else:
                F = tpl.patterns
                k, s = F.shape[0], F.shape[1]
                Y = Z[:, None] @ F[None] @ W[:, None]
                Q = F.reshape(k, s * s) @ np.swapaxes(Y.reshape(-1, k, s * s), 1, 2)
            vals.append(Q.ravel())
        if self.ncut:
            w = zc / sc
            r, i, j = self._cut_terms
            a = self.cut_matrix.data
            vals.append(w[r] * a[i] * a[j])
        n = self.m - 1
        data = np.bincount(self._scatter, np.concatenate(vals), minlength=self._nnz)
        return scipy.sparse.csr_matrix((data, self._indices, self._indptr), shape=(n, n))


def _batched_min_eig_step(X: np.ndarray, dX: np.ndarray, L: np.ndarray | None = None) -> float:
    """Largest alpha (possibly inf) keeping X + alpha dX PSD, X positive definite."""
    if L is None:
        L = np.linalg.cholesky(X)
    Linv = np.linalg.inv(L)
    T = Linv @ dX @ np.swapaxes(Linv, -1, -2)
    T = 0.5 * (T + np.swapaxes(T, -1, -2))
    lam = float(np.linalg.eigvalsh(T)[..., 0].min())
    return math.inf if lam >= 0 else -1.0 / lam


def _ratio_step(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


class _SchurSolver:
    """Factorises Schur complements that all share one sparsity pattern."""

    def __init__(self, layout: _Layout):
        self.layout = layout
        self.n = layout.m - 1
        self.dense = self.n <= DENSE_SCHUR_LIMIT or cholmod is None and self.n <= 4000
        self._symbolic = None

    def factor(self, M: scipy.sparse.csr_matrix) -> None:
        try:
            self._factor(M)
        except (np.linalg.LinAlgError, ArithmeticError, RuntimeError, ValueError):
            shift = 1e-12 * max(1.0, float(np.abs(M.diagonal()).max()))
            self._factor(M + shift * scipy.sparse.identity(self.n, format="csr"))

    def _factor(self, M) -> None:
        if self.dense:
            self._chol = scipy.linalg.cho_factor(M.toarray(), lower=True, check_finite=False)
        elif cholmod is not None:
            if self._symbolic is None:
                # CSR order of M is the column-compressed order of M^T = M
                lay = self.layout
                self._A = cvxopt.spmatrix(
                    cvxopt.matrix(M.data), cvxopt.matrix(lay._indices.tolist(), tc="i"),
                    cvxopt.matrix(lay._rows.tolist(), tc="i"), (self.n, self.n),
                )
                self._symbolic = cholmod.symbolic(self._A)
            else:
                self._A.V = cvxopt.matrix(M.data)
            cholmod.numeric(self._A, self._symbolic)
        else:
            self._lu = scipy.sparse.linalg.splu(
                M.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                options={"SymmetricMode": True},
            )

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.dense:
            return scipy.linalg.cho_solve(self._chol, rhs, check_finite=False)
        if cholmod is not None:
            b = cvxopt.matrix(np.ascontiguousarray(rhs, dtype=float))
            cholmod.solve(self._symbolic, b)
            return np.array(b).ravel()
        return self._lu.solve(rhs)


def _sym(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def certified_bound(problem: RelaxationProblem, Zs, zc, layout: _Layout | None = None) -> float:
    """Valid lower bound on the relaxation optimum from an arbitrary dual point."""
    lay = layout or _Layout(problem)
    c = problem.objective
    resid = c - lay.adjoint(Zs)
    if lay.ncut:
        resid -= lay.cut_matrix.T @ zc
    resid[0] = 0.0
    delta = resid / (2.0 * np.maximum(lay.entry_count, 1.0))
    delta[0] = 0.0
    total = [c[0]]
    scale = abs(c[0])
    for g, Z in zip(lay.groups, Zs):
        Zp = Z + delta[g.index]
        lam = np.linalg.eigvalsh(_sym(Zp))[:, 0]
        tr = np.trace(Z, axis1=1, axis2=2)
        dim = g.template.dim
        total.append(-float(tr.sum()))
        total.append(dim * float(np.minimum(lam, 0.0).sum()))
        scale += float(np.abs(Zp).sum())
    if lay.ncut:
        total.append(-float(lay.cut_const @ zc))
        total.append(float(lay.cut_smax @ np.minimum(zc, 0.0)))
        scale += float(np.abs(zc) @ lay.cut_smax)
    # rounding in the sums above
    return math.fsum(total) - 1e-13 * (1.0 + scale)


def feasibility_check(problem: RelaxationProblem, y: np.ndarray) -> dict:
    """Minimum eigenvalue per block, worst cut violation and objective value."""
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.num_variables,):
        raise ContractViolation("moment vector has the wrong length")
    eigs = [float(np.linalg.eigvalsh(y[b.index])[0]) for b in problem.blocks]
    viol = [max(0.0, c.lower - c.value(y)) for c in problem.cuts]
    return {
        "min_eigenvalues": eigs,
        "min_eigenvalue": min(eigs, default=0.0),
        "max_cut_violation": max(viol, default=0.0),
        "objective": float(problem.objective @ y),
        "constant": float(y[0]),
    }


def _check_problem(problem: RelaxationProblem) -> None:
    m = problem.num_variables
    if m == 0 or problem.monomials[0] != ():
        raise ContractViolation("variable 0 must be the constant monomial")
    if problem.objective.shape != (m,):
        raise ContractViolation("objective length does not match the variable count")
    for b in problem.blocks:
        idx = b.index
        if not np.array_equal(idx, idx.T):
            raise ContractViolation("block index map is not symmetric")
        if np.any(np.diag(idx) != 0):
            raise ContractViolation("block diagonal must map to the constant monomial")
        if idx.min() < 0 or idx.max() >= m:
            raise ContractViolation("block references an unknown variable")


def solve(problem: RelaxationProblem, options: SolverOptions | None = None) -> SDPSolution:
    opts = options or SolverOptions()
    _check_problem(problem)
    lay = _Layout(problem)
    c = problem.objective
    m = lay.m

    y = np.zeros(m)
    y[0] = 1.0
    if m == 1:
        return SDPSolution(
            y, [], float(c[0]), float(c[0]), OPTIMAL,
            {"dual_infeasibility": 0.0, "relative_gap": 0.0, "mu": 0.0, "certified_gap": 0.0},
            0, float(c[0]),
        )
    zeta = max(1.0, float(np.abs(c[1:]).max(initial=0.0)))
    Zs = [zeta * np.broadcast_to(np.eye(g.template.dim), g.index.shape).copy() for g in lay.groups]
    zc = np.full(lay.ncut, zeta)

    fac = _SchurSolver(lay)
    best_bound = -math.inf
    best_dual = (Zs, zc)
    status = MAX_ITERATIONS
    ntot = lay.total_dim + lay.ncut
    cnorm = 1.0 + float(np.abs(c[1:]).max(initial=0.0))
    residuals: dict[str, float] = {}
    it = 0
    pobj = dobj = math.nan

    for it in range(opts.max_iter + 1):
        Ss = lay.matrices(y)
        sc = lay.cut_const + lay.cut_matrix @ y if lay.ncut else np.zeros(0)
        try:
            Ls = [np.linalg.cholesky(S) for S in Ss]
            LZs = [np.linalg.cholesky(Z) for Z in Zs]
        except np.linalg.LinAlgError:
            status = NUMERICAL_TROUBLE
            break
        if lay.ncut and (np.any(sc <= 0) or np.any(zc <= 0)):
            status = NUMERICAL_TROUBLE
            break
        Ws = [_sym(np.linalg.inv(S)) for S in Ss]

        pobj = float(c @ y)
        dobj = c[0] - sum(float(np.trace(Z, axis1=1, axis2=2).sum()) for Z in Zs)
        if lay.ncut:
            dobj -= float(lay.cut_const @ zc)
        comp = sum(float(np.sum(S * Z)) for S, Z in zip(Ss, Zs)) + float(sc @ zc)
        mu = comp / ntot
        resid = c - lay.adjoint(Zs)
        if lay.ncut:
            resid -= lay.cut_matrix.T @ zc
        dinf = float(np.abs(resid[1:]).max(initial=0.0)) / cnorm
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

        bound = certified_bound(problem, Zs, zc, lay)
        if bound > best_bound:
            best_bound = bound
            best_dual = ([Z.copy() for Z in Zs], zc.copy())
        residuals = {"dual_infeasibility": dinf, "relative_gap": relgap, "mu": mu}
        if opts.verbose:
            log.info(
                "it %3d pobj %+.10e dobj %+.10e gap %.2e dinf %.2e bound %+.10e",
                it, pobj, dobj, relgap, dinf, bound,
            )
        if relgap <= opts.gap_tol and dinf <= opts.feas_tol:
            status = OPTIMAL
            break
        if opts.cutoff is not None and best_bound >= opts.cutoff:
            status = CUTOFF
            break
        if it == opts.max_iter:
            break

        try:
            fac.factor(lay.schur(Zs, Ws, zc, sc))
        except (np.linalg.LinAlgError, ArithmeticError, RuntimeError, ValueError):
            status = NUMERICAL_TROUBLE
            break

        FW = lay.adjoint(Ws)
        cut_w = lay.cut_matrix.T @ (1.0 / sc) if lay.ncut else 0.0

        def direction(sigma_mu: float, corr_blocks, corr_cuts):
            rhs = sigma_mu * (FW + cut_w) - c
            if corr_blocks is not None:
                rhs = rhs - lay.adjoint(corr_blocks)
                if lay.ncut:
                    rhs = rhs - lay.cut_matrix.T @ corr_cuts
            dy = np.zeros(m)
            dy[1:] = fac.solve(rhs[1:])
            # dy[0] = 0, so the diagonals of dS vanish
            dSs = lay.matrices(dy)
            dZs = []
            for k, (Z, W, dS) in enumerate(zip(Zs, Ws, dSs)):
                dZ = sigma_mu * W - Z - Z @ dS @ W
                if corr_blocks is not None:
                    dZ = dZ - corr_blocks[k]
                dZs.append(_sym(dZ))
            if lay.ncut:
                ds = lay.cut_matrix @ dy
                dz = sigma_mu / sc - zc - zc * ds / sc
                if corr_cuts is not None:
                    dz = dz - corr_cuts
            else:
                ds = dz = np.zeros(0)
            return dy, dSs, dZs, ds, dz

        def step_lengths(dSs, dZs, ds, dz):
            ap = min(_batched_min_eig_step(S, dS, L) for S, dS, L in zip(Ss, dSs, Ls))
            ad = min(_batched_min_eig_step(Z, dZ, L) for Z, dZ, L in zip(Zs, dZs, LZs))
            if lay.ncut:
                ap = min(ap, _ratio_step(sc, ds))
                ad = min(ad, _ratio_step(zc, dz))
            return ap, ad

        try:
            dy, dSs, dZs, ds, dz = direction(0.0, None, None)
            ap, ad = step_lengths(dSs, dZs, ds, dz)
            ap, ad = min(1.0, ap), min(1.0, ad)
            comp_aff = sum(
                float(np.sum((S + ap * dS) * (Z + ad * dZ)))
                for S, dS, Z, dZ in zip(Ss, dSs, Zs, dZs)
            )
            if lay.ncut:
                comp_aff += float((sc + ap * ds) @ (zc + ad * dz))
            sigma = min(1.0, max(0.0, comp_aff / comp)) ** 3
            corr_b = [dZ @ dS @ W for dZ, dS, W in zip(dZs, dSs, Ws)]
            corr_c = dz * ds / sc if lay.ncut else None
            dy, dSs, dZs, ds, dz = direction(sigma * mu, corr_b, corr_c)
            ap, ad = step_lengths(dSs, dZs, ds, dz)
        except np.linalg.LinAlgError:
            status = NUMERICAL_TROUBLE
            break
        if not (np.all(np.isfinite(dy)) and all(np.all(np.isfinite(d)) for d in dZs)):
            status = NUMERICAL_TROUBLE
            break
        gamma = 0.9 + 0.09 * min(1.0, ap, ad)
        ap = min(1.0, gamma * ap)
        ad = min(1.0, gamma * ad)
        y = y + ap * dy
        y[0] = 1.0
        Zs = [Z + ad * dZ for Z, dZ in zip(Zs, dZs)]
        if lay.ncut:
            zc = zc + ad * dz

    # report the iterate; the certified bound is the best seen
    if status == NUMERICAL_TROUBLE:
        bound = certified_bound(problem, *best_dual, lay)
        best_bound = max(best_bound, bound)
    blocks = [None] * lay.nblocks
    for g, S in zip(lay.groups, lay.matrices(y)):
        for k, b in enumerate(g.blocks):
            blocks[b] = S[k]
    residuals["certified_gap"] = pobj - best_bound if math.isfinite(pobj) else math.nan
    return SDPSolution(
        y=y,
        block_matrices=blocks,
        primal_objective=float(c @ y),
        dual_bound=float(best_bound),
        status=status,
        residuals=residuals,
        iterations=it,
        dual_objective=float(dobj),
    )
