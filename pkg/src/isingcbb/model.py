"""Ising instances: representation, energies, generators, oracle and text I/O.

The energy of a configuration ``s`` in {-1, +1}^n is

    H(s) = offset - sum_{i<j} J_ij s_i s_j + sum_i h_i s_i

so positive couplings are ferromagnetic.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .rng import SpinRNG

BRUTE_FORCE_CAP = 24


class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract."""


class ProblemTooLarge(ValueError):
    """Exhaustive enumeration refused because the instance is too big."""


class InstanceFormatError(ValueError):
    """Malformed instance text; ``line`` is the 1-based offending line."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class SpinModel:
    """An Ising Hamiltonian on ``n`` spins.

    ``couplings`` holds ``(i, j, J)`` with ``i < j`` and ``fields`` holds
    ``(i, h)``.  Entries are stored sorted and zero coefficients are dropped,
    so two models describing the same Hamiltonian compare equal.  ``labels``
    maps local spin indices back to the spins of the instance this model was
    derived from by :func:`fix_spin`; it does not take part in equality.
    """

    n: int
    couplings: tuple[tuple[int, int, float], ...] = ()
    fields: tuple[tuple[int, float], ...] = ()
    offset: float = 0.0
    labels: tuple[int, ...] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise ContractViolation("spin count must be non-negative")
        seen = set()
        couplings = []
        for i, j, J in self.couplings:
            i, j, J = int(i), int(j), float(J)
            if not (0 <= i < n and 0 <= j < n):
                raise ContractViolation(f"coupling ({i}, {j}) has an index out of range")
            if i >= j:
                raise ContractViolation(f"coupling ({i}, {j}) must satisfy i < j")
            if (i, j) in seen:
                raise ContractViolation(f"duplicate coupling ({i}, {j})")
            if not math.isfinite(J):
                raise ContractViolation(f"coupling ({i}, {j}) is not finite")
            seen.add((i, j))
            if J != 0.0:
                couplings.append((i, j, J))
        seen_fields = set()
        fields = []
        for i, h in self.fields:
            i, h = int(i), float(h)
            if not 0 <= i < n:
                raise ContractViolation(f"field index {i} out of range")
            if i in seen_fields:
                raise ContractViolation(f"duplicate field for spin {i}")
            if not math.isfinite(h):
                raise ContractViolation(f"field on spin {i} is not finite")
            seen_fields.add(i)
            if h != 0.0:
                fields.append((i, h))
        offset = float(self.offset)
        if not math.isfinite(offset):
            raise ContractViolation("offset is not finite")
        labels = self.labels
        if labels is None:
            labels = tuple(range(n))
        elif len(labels) != n:
            raise ContractViolation("labels must have one entry per spin")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "couplings", tuple(sorted(couplings)))
        object.__setattr__(self, "fields", tuple(sorted(fields)))
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "labels", tuple(int(x) for x in labels))

    @cached_property
    def field_vector(self) -> np.ndarray:
        h = np.zeros(self.n)
        for i, value in self.fields:
            h[i] = value
        return h

    @cached_property
    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if not self.couplings:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty.copy(), np.zeros(0)
        i, j, J = zip(*self.couplings)
        return np.array(i, dtype=np.int64), np.array(j, dtype=np.int64), np.array(J)

    def neighbors(self) -> list[list[tuple[int, float]]]:
        out: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for i, j, J in self.couplings:
            out[i].append((j, J))
            out[j].append((i, J))
        return out

    def scaled(self, factor: float) -> SpinModel:
        return SpinModel(
            self.n,
            tuple((i, j, factor * J) for i, j, J in self.couplings),
            tuple((i, factor * h) for i, h in self.fields),
            factor * self.offset,
            labels=self.labels,
        )


@dataclass(frozen=True)
class OracleResult:
    energy: float
    configurations: tuple[tuple[int, ...], ...]

    @property
    def configuration(self) -> tuple[int, ...]:
        return self.configurations[0]


def check_configuration(model: SpinModel, config: Sequence[int]) -> tuple[int, ...]:
    """Validate ``config`` against ``model`` and return it as a tuple of ints."""
    if len(config) != model.n:
        raise ContractViolation(
            f"configuration has length {len(config)}, model has {model.n} spins"
        )
    spins = tuple(int(s) for s in config)
    for k, (raw, s) in enumerate(zip(config, spins)):
        if s not in (-1, 1) or raw != s:
            raise ContractViolation(f"spin {k} has value {raw!r}, expected -1 or +1")
    return spins


def energy(model: SpinModel, config: Sequence[int]) -> float:
    """Energy of ``config``, summed with ``math.fsum`` in a fixed term order."""
    s = check_configuration(model, config)
    terms = [model.offset]
    terms.extend(-J * s[i] * s[j] for i, j, J in model.couplings)
    terms.extend(h * s[i] for i, h in model.fields)
    return math.fsum(terms)


def _config_block(n: int, start: int, stop: int) -> np.ndarray:
    # Row k holds configuration number k; spin 0 is the most significant bit,
    # so increasing k is lexicographic order with -1 before +1.
    k = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    bits = (k[:, None] >> shifts[None, :]) & 1
    return (2 * bits - 1).astype(np.float64)


def brute_force_ground(
    model: SpinModel, max_spins: int = BRUTE_FORCE_CAP, all_minimizers: bool = False
) -> OracleResult:
    """Exhaustive minimum over all 2^n configurations.

    Ties are broken towards the lexicographically smallest configuration
    (-1 ordered before +1).  With ``all_minimizers`` every configuration whose
    energy equals the minimum is returned, in lexicographic order.
    """
    n = model.n
    if n > max_spins:
        raise ProblemTooLarge(f"{n} spins exceeds the exhaustive-search cap of {max_spins}")
    if n == 0:
        return OracleResult(model.offset, ((),))
    ei, ej, J = model.edge_arrays
    h = model.field_vector
    total = 1 << n
    chunk = 1 << min(n, 16)
    best = math.inf
    candidates: list[int] = []
    slack = 1e-9 * (1.0 + sum(abs(x) for x in J) + sum(abs(x) for x in h))
    for start in range(0, total, chunk):
        S = _config_block(n, start, min(total, start + chunk))
        E = model.offset + S @ h - (S[:, ei] * S[:, ej]) @ J
        lo = float(E.min())
        if lo < best - slack:
            candidates = []
        best = min(best, lo)
        near = np.nonzero(E <= best + slack)[0]
        candidates.extend(int(start + k) for k in near)
    # exact re-evaluation of the near-optimal set removes vectorised rounding
    exact = []
    for k in candidates:
        cfg = tuple(int(v) for v in _config_block(n, k, k + 1)[0])
        exact.append((energy(model, cfg), cfg))
    e_min = min(e for e, _ in exact)
    winners = sorted(cfg for e, cfg in exact if e == e_min)
    if not all_minimizers:
        winners = winners[:1]
    return OracleResult(e_min, tuple(winners))


def fix_spin(model: SpinModel, i: int, s: int) -> SpinModel:
    """Model on the remaining n-1 spins with spin ``i`` clamped to ``s``.

    Local indices above ``i`` shift down by one; ``labels`` of the result
    keeps track of the original spin numbers.
    """
    if not 0 <= i < model.n:
        raise ContractViolation(f"spin index {i} out of range for {model.n} spins")
    if s not in (-1, 1):
        raise ContractViolation(f"spin value must be -1 or +1, got {s!r}")

    def local(k: int) -> int:
        return k if k < i else k - 1

    h = dict(model.fields)
    offset_terms = [model.offset, h.pop(i, 0.0) * s]
    couplings = []
    for a, b, J in model.couplings:
        if a == i:
            h[b] = h.get(b, 0.0) - J * s
        elif b == i:
            h[a] = h.get(a, 0.0) - J * s
        else:
            couplings.append((local(a), local(b), J))
    fields = [(local(k), v) for k, v in h.items()]
    labels = model.labels[:i] + model.labels[i + 1 :]
    return SpinModel(model.n - 1, tuple(couplings), tuple(fields), math.fsum(offset_terms), labels)


# ---------------------------------------------------------------------------
# benchmark families


def _gaussian_fields(n: int, sigma: float, rng: SpinRNG) -> list[tuple[int, float]]:
    return [(i, rng.normal(sigma)) for i in range(n)]


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma >= 0):
        raise ContractViolation("sigma must be a finite non-negative number")
    return sigma


def square_edges(L: int) -> list[tuple[int, int]]:
    edges = []
    for r in range(L):
        for c in range(L):
            v = r * L + c
            if c + 1 < L:
                edges.append((v, v + 1))
            if r + 1 < L:
                edges.append((v, v + L))
    return edges


def gen_square(L: int, sigma: float, seed: int) -> SpinModel:
    """L x L open grid, J = 1 on every bond, fields ~ Normal(0, sigma^2).

    Fields are drawn for spins 0..n-1 in row-major order.
    """
    if int(L) < 1:
        raise ContractViolation("L must be at least 1")
    L = int(L)
    sigma = _check_sigma(sigma)
    rng = SpinRNG(seed)
    couplings = [(a, b, 1.0) for a, b in square_edges(L)]
    return SpinModel(L * L, tuple(couplings), tuple(_gaussian_fields(L * L, sigma, rng)))


def gen_triangular(rows: int, cols: int, sigma: float, seed: int) -> SpinModel:
    """Open grid plus the (r, c)-(r+1, c+1) diagonal of every plaquette."""
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise ContractViolation("rows and cols must be at least 1")
    sigma = _check_sigma(sigma)
    rng = SpinRNG(seed)
    couplings = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                couplings.append((v, v + 1, 1.0))
            if r + 1 < rows:
                couplings.append((v, v + cols, 1.0))
            if r + 1 < rows and c + 1 < cols:
                couplings.append((v, v + cols + 1, 1.0))
    n = rows * cols
    return SpinModel(n, tuple(couplings), tuple(_gaussian_fields(n, sigma, rng)))


def chimera_index(L: int, r: int, c: int, part: int, k: int) -> int:
    """Spin index of unit ``k`` (0..3) of part A (0) or B (1) in cell (r, c)."""
    return 8 * (r * L + c) + 4 * part + k


def gen_chimera(L: int, sigma: float, seed: int) -> SpinModel:
    """L x L grid of K_{4,4} cells; A units couple down columns, B units along rows."""
    L = int(L)
    if L < 1:
        raise ContractViolation("L must be at least 1")
    sigma = _check_sigma(sigma)
    rng = SpinRNG(seed)
    couplings = []
    for r in range(L):
        for c in range(L):
            for a in range(4):
                for b in range(4):
                    couplings.append(
                        (chimera_index(L, r, c, 0, a), chimera_index(L, r, c, 1, b), 1.0)
                    )
            for k in range(4):
                if r + 1 < L:
                    couplings.append(
                        (chimera_index(L, r, c, 0, k), chimera_index(L, r + 1, c, 0, k), 1.0)
                    )
                if c + 1 < L:
                    couplings.append(
                        (chimera_index(L, r, c, 1, k), chimera_index(L, r, c + 1, 1, k), 1.0)
                    )
    n = 8 * L * L
    return SpinModel(n, tuple(couplings), tuple(_gaussian_fields(n, sigma, rng)))


def gen_random(n: int, p: float, seed: int) -> SpinModel:
    """Erdos-Renyi dependency graph with standard-normal couplings and fields.

    Pairs (i, j) are visited in lexicographic order; each consumes one
    uniform for inclusion and, if included, one Gaussian for J.  Fields for
    spins 0..n-1 are drawn afterwards.
    """
    n = int(n)
    p = float(p)
    if n < 0:
        raise ContractViolation("n must be non-negative")
    if not 0.0 <= p <= 1.0:
        raise ContractViolation("edge probability must lie in [0, 1]")
    rng = SpinRNG(seed)
    couplings = []
    for i, j in itertools.combinations(range(n), 2):
        if rng.uniform() < p:
            couplings.append((i, j, rng.normal()))
    return SpinModel(n, tuple(couplings), tuple(_gaussian_fields(n, 1.0, rng)))


# ---------------------------------------------------------------------------
# text format


def format_number(x: float) -> str:
    """Shortest positional decimal that round-trips to ``x``."""
    return np.format_float_positional(float(x), unique=True, trim="0")


def serialize_instance(model: SpinModel) -> str:
    if model.offset != 0.0:
        raise ContractViolation("instances with a non-zero offset cannot be serialized")
    lines = [f"{model.n} {len(model.couplings)}"]
    lines += [f"{i} {j} {format_number(J)}" for i, j, J in model.couplings]
    lines.append(str(len(model.fields)))
    lines += [f"{i} {format_number(h)}" for i, h in model.fields]
    return "\n".join(lines) + "\n"


def _content_lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.split("\n"), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        yield lineno, stripped.split()


def _parse_int(tok: str, what: str, line: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise InstanceFormatError(f"expected integer {what}, got {tok!r}", line) from None


def _parse_float(tok: str, what: str, line: int) -> float:
    try:
        x = float(tok)
    except ValueError:
        raise InstanceFormatError(f"expected number {what}, got {tok!r}", line) from None
    if not math.isfinite(x):
        raise InstanceFormatError(f"{what} must be finite", line)
    return x


def parse_instance(text: str) -> SpinModel:
    lines = iter(_content_lines(text))

    def take(what: str) -> tuple[int, list[str]]:
        try:
            return next(lines)
        except StopIteration:
            raise InstanceFormatError(f"unexpected end of input, expected {what}", last) from None

    last = max(1, text.count("\n"))
    line, toks = take("header 'N M'")
    if len(toks) != 2:
        raise InstanceFormatError("header must be 'N M'", line)
    n = _parse_int(toks[0], "spin count", line)
    m = _parse_int(toks[1], "coupling count", line)
    if n < 0 or m < 0:
        raise InstanceFormatError("counts must be non-negative", line)

    def index(tok: str, line: int) -> int:
        k = _parse_int(tok, "spin index", line)
        if not 0 <= k < n:
            raise InstanceFormatError(f"index {k} out of range", line)
        return k

    couplings = []
    seen = set()
    for _ in range(m):
        line, toks = take("coupling line 'i j J'")
        if len(toks) != 3:
            raise InstanceFormatError("coupling line must be 'i j J'", line)
        i, j = index(toks[0], line), index(toks[1], line)
        J = _parse_float(toks[2], "coupling", line)
        if i >= j:
            raise InstanceFormatError(f"coupling ({i}, {j}) must satisfy i < j", line)
        if (i, j) in seen:
            raise InstanceFormatError(f"duplicate edge ({i}, {j})", line)
        seen.add((i, j))
        couplings.append((i, j, J))
    line, toks = take("field count")
    if len(toks) != 1:
        raise InstanceFormatError("field count line must hold one integer", line)
    f = _parse_int(toks[0], "field count", line)
    if f < 0:
        raise InstanceFormatError("field count must be non-negative", line)
    fields = []
    seen_fields = set()
    for _ in range(f):
        line, toks = take("field line 'i h'")
        if len(toks) != 2:
            raise InstanceFormatError("field line must be 'i h'", line)
        i = index(toks[0], line)
        if i in seen_fields:
            raise InstanceFormatError(f"duplicate field for spin {i}", line)
        seen_fields.add(i)
        fields.append((i, _parse_float(toks[1], "field", line)))
    for line, _ in lines:
        raise InstanceFormatError("trailing content after the field list", line)
    return SpinModel(n, tuple(couplings), tuple(fields))


def instance_digest(model: SpinModel) -> str:
    """SHA-256 of the canonical serialization (offset included when non-zero)."""
    text = serialize_instance(model.__class__(model.n, model.couplings, model.fields))
    if model.offset != 0.0:
        text += f"# offset {format_number(model.offset)}\n"
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
