"""Command-line front end: ``isingcbb gen|solve|brute|verify|bench``.

Exit codes: 0 success (converged), 2 bad input or refused request,
3 valid but not converged (a budget ran out).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .bnb import CBBParams, Certificate, VerificationRefused, solve_cbb, verify_external
from .model import (
    ContractViolation,
    InstanceFormatError,
    ProblemTooLarge,
    SpinModel,
    brute_force_ground,
    gen_chimera,
    gen_random,
    gen_square,
    gen_triangular,
    instance_digest,
    parse_instance,
    serialize_instance,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3

FAMILIES = ("square", "triangular", "chimera", "random")
MODES = ("cbb", "nonchordal")
# the dense single-block relaxation grows as n^2 variables; beyond this it
# takes tens of minutes per instance
NONCHORDAL_MAX_SPINS = 36
CBB_MAX_SPINS = 2000

BENCH_COLUMNS = ("size", "seed", "nodes", "wall_time", "converged", "lower", "upper", "note")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunParams:
    """Everything a solve depends on; ``solver`` is echoed into certificates."""

    solver: CBBParams = field(default_factory=CBBParams)
    mode: str = "cbb"
    seed: int | None = None
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractViolation(f"unknown mode {self.mode!r}")
        if self.jobs < 1:
            raise ContractViolation("jobs must be at least 1")

    def spin_cap(self) -> int:
        return NONCHORDAL_MAX_SPINS if self.mode == "nonchordal" else CBB_MAX_SPINS


def generate(family: str, size: int, sigma: float, seed: int, p: float = 0.5,
             cols: int | None = None) -> SpinModel:
    if family == "square":
        return gen_square(size, sigma, seed)
    if family == "triangular":
        return gen_triangular(size, size if cols is None else cols, sigma, seed)
    if family == "chimera":
        return gen_chimera(size, sigma, seed)
    if family == "random":
        return gen_random(size, p, seed)
    raise ContractViolation(f"unknown family {family!r}")


def _read_instance(path: str) -> SpinModel:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_instance(text)


def parse_config_text(text: str) -> tuple[int, ...]:
    """Spins as ``+-+-`` or as integers separated by spaces/commas."""
    text = text.strip()
    if text and set(text) <= {"+", "-"}:
        return tuple(1 if ch == "+" else -1 for ch in text)
    spins = []
    for tok in text.replace(",", " ").split():
        try:
            v = int(tok)
        except ValueError:
            raise UsageError(f"bad spin value {tok!r}") from None
        if v not in (-1, 1):
            raise UsageError(f"spin values must be -1 or +1, got {tok}")
        spins.append(v)
    return tuple(spins)


def _load_config(arg: str) -> tuple[int, ...]:
    if os.path.isfile(arg):
        return parse_config_text(Path(arg).read_text())
    return parse_config_text(arg)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# --- argument plumbing --------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    d = CBBParams()
    g.add_argument("--mode", choices=MODES, default="cbb",
                   help="cbb: chordal blocks; nonchordal: one dense block (small n only)")
    g.add_argument("--n-t", type=int, default=d.n_t,
                   help="cliques with fewer spins use the level-2 basis (default %(default)s)")
    g.add_argument("--branch-rule", choices=("easy_first", "hard_first"), default=d.branch_rule)
    g.add_argument("--cuts", action="store_true", help="separate triangle inequalities")
    g.add_argument("--cut-rounds", type=int, default=d.cut_rounds)
    g.add_argument("--cuts-per-round", type=int, default=d.cuts_per_round)
    g.add_argument("--gap-tolerance", type=float, default=d.gap_tolerance,
                   help="converged when upper - lower <= tol * (1 + |upper|)")
    g.add_argument("--feas-tol", type=float, default=d.feas_tol)
    g.add_argument("--sdp-gap-tol", type=float, default=d.gap_tol)
    g.add_argument("--max-iter", type=int, default=d.max_iter)
    g.add_argument("--max-nodes", type=int, default=d.max_nodes)
    g.add_argument("--time-limit", type=float, default=None, help="seconds")
    g.add_argument("--oracle-leaf", type=int, default=d.oracle_leaf,
                   help="finish nodes with at most this many spins by enumeration (0: never)")
    g.add_argument("--jobs", type=int, default=1)


def run_params_from_args(args: argparse.Namespace, trace: bool = False) -> RunParams:
    solver = CBBParams(
        n_t=args.n_t,
        branch_rule=args.branch_rule,
        chordal=args.mode == "cbb",
        cuts=args.cuts,
        cut_rounds=args.cut_rounds,
        cuts_per_round=args.cuts_per_round,
        feas_tol=args.feas_tol,
        gap_tol=args.sdp_gap_tol,
        max_iter=args.max_iter,
        gap_tolerance=args.gap_tolerance,
        max_nodes=args.max_nodes,
        time_limit=args.time_limit,
        oracle_leaf=args.oracle_leaf,
        trace=trace,
    )
    return RunParams(solver, args.mode, getattr(args, "seed", None), args.jobs)


def _check_cap(model: SpinModel, run: RunParams) -> None:
    if model.n > run.spin_cap():
        raise ProblemTooLarge(
            f"{run.mode} mode is limited to {run.spin_cap()} spins (instance has {model.n})"
        )


# --- commands -----------------------------------------------------------------


def cmd_gen(args: argparse.Namespace) -> int:
    size = args.n if args.family == "random" else args.L
    if size is None:
        raise UsageError("--n is required for random" if args.family == "random"
                         else "--L is required")
    model = generate(args.family, size, args.sigma, args.seed, args.p, args.cols)
    text = serialize_instance(model)
    summary = f"n={model.n} edges={len(model.couplings)} digest={instance_digest(model)}\n"
    if args.out:
        Path(args.out).write_text(text)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)
        sys.stderr.write(summary)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    model = _read_instance(args.instance)
    run = run_params_from_args(args, trace=args.trace or bool(args.plot_data))
    _check_cap(model, run)
    cert = solve_cbb(model, run.solver, jobs=run.jobs)
    _emit(cert.to_json(include_trace=args.trace), args.out)
    if args.plot_data:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("step", "lower", "upper"))
        for step, lo, up in cert.staircase():
            w.writerow((step, repr(lo), repr(up)))
        Path(args.plot_data).write_text(buf.getvalue())
    return EXIT_OK if cert.converged else EXIT_NOT_CONVERGED


def cmd_brute(args: argparse.Namespace) -> int:
    model = _read_instance(args.instance)
    result = brute_force_ground(model, max_spins=args.max_spins, all_minimizers=args.all)
    out = {
        "instance_digest": instance_digest(model),
        "n": model.n,
        "energy": result.energy,
        "config": list(result.configuration),
    }
    if args.all:
        out["configurations"] = [list(c) for c in result.configurations]
    _emit(_dump_json(out), args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    model = _read_instance(args.instance)
    config = _load_config(args.config)
    cert = None
    if args.certificate:
        try:
            cert = Certificate.from_json(Path(args.certificate).read_text())
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read certificate {args.certificate}: {exc}") from exc
    run = run_params_from_args(args)
    if cert is None:
        _check_cap(model, run)
    report = verify_external(model, config, cert, run.solver)
    _emit(_dump_json(report), args.out)
    return EXIT_OK if report["certified_converged"] else EXIT_NOT_CONVERGED


@dataclass(frozen=True)
class BenchEntry:
    family: str
    size: int
    seed: int
    sigma: float
    p: float
    run: RunParams


def bench_row(entry: BenchEntry) -> dict:
    """One CSV row; oversize entries are refused rather than run."""
    row = {"size": entry.size, "seed": entry.seed}
    model = generate(entry.family, entry.size, entry.sigma, entry.seed, entry.p)
    if model.n > entry.run.spin_cap():
        row["note"] = (f"refused: {entry.run.mode} mode limited to "
                       f"{entry.run.spin_cap()} spins (n={model.n})")
        return row
    cert = solve_cbb(model, entry.run.solver)
    row.update(
        nodes=cert.nodes_explored,
        wall_time=f"{cert.wall_time:.6f}",
        converged=str(cert.converged).lower(),
        lower=repr(cert.lower),
        upper=repr(cert.upper),
        note="",
    )
    return row


def load_bench_config(path: str) -> dict:
    """JSON sweep description: family, sizes, sigma, seeds, optional p/mode/solver."""
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read bench config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("bench config must be a JSON object")
    return cfg


def bench_entries(family: str, sizes: Sequence[int], sigma: float, seeds: Sequence[int],
                  run: RunParams, p: float = 0.5) -> list[BenchEntry]:
    return [BenchEntry(family, int(s), int(k), sigma, p, run) for s in sizes for k in seeds]


def run_bench(entries: Sequence[BenchEntry], jobs: int = 1) -> str:
    if jobs > 1 and len(entries) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(bench_row, entries))
    else:
        rows = [bench_row(e) for e in entries]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, restval="", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def cmd_bench(args: argparse.Namespace) -> int:
    family, sizes, sigma, p = args.family, args.sizes, args.sigma, args.p
    seeds = list(range(args.seed_start, args.seed_start + args.seeds))
    run = run_params_from_args(args)
    if args.config:
        cfg = load_bench_config(args.config)
        family = cfg.get("family", family)
        sizes = cfg.get("sizes", sizes)
        sigma = float(cfg.get("sigma", sigma))
        p = float(cfg.get("p", p))
        if "seeds" in cfg:
            seeds = cfg["seeds"] if isinstance(cfg["seeds"], list) else list(range(cfg["seeds"]))
        mode = cfg.get("mode", run.mode)
        solver = CBBParams(**{**run.solver.to_dict(), "chordal": mode == "cbb",
                              **cfg.get("solver", {})})
        run = RunParams(solver, mode, None, run.jobs)
    if family is None:
        raise UsageError("a family is required (positional or in --config)")
    if family not in FAMILIES:
        raise UsageError(f"unknown family {family!r}")
    entries = bench_entries(family, sizes or [], sigma, seeds, run, p)
    text = run_bench(entries, run.jobs)
    _emit(text, args.out)
    rows = list(csv.DictReader(io.StringIO(text)))
    ok = all(r["converged"] in ("true", "") for r in rows)
    return EXIT_OK if ok else EXIT_NOT_CONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isingcbb", description="Certified Ising ground states by chordal branch and bound."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a benchmark instance")
    g.add_argument("family", choices=FAMILIES)
    g.add_argument("--L", type=int, help="side length (square/triangular rows/chimera cells)")
    g.add_argument("--cols", type=int, help="triangular columns (default: L)")
    g.add_argument("--n", type=int, help="spin count (random)")
    g.add_argument("--p", type=float, default=0.5, help="edge probability (random)")
    g.add_argument("--sigma", type=float, default=1.5, help="field standard deviation")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="instance file (default: stdout)")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="certify the ground state of an instance")
    s.add_argument("instance")
    _add_run_flags(s)
    s.add_argument("--trace", action="store_true", help="include the per-node trace")
    s.add_argument("--plot-data", metavar="CSV", help="write the (step, lower, upper) staircase")
    s.add_argument("--out", help="certificate file (default: stdout)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("brute", help="exhaustive search (n <= 24)")
    b.add_argument("instance")
    b.add_argument("--all", action="store_true", help="list every minimizer")
    b.add_argument("--max-spins", type=int, default=24)
    b.add_argument("--out")
    b.set_defaults(func=cmd_brute)

    v = sub.add_parser("verify", help="compare an external configuration with the certified one")
    v.add_argument("instance")
    v.add_argument("--config", required=True,
                   help="file or inline string: '+-+-' or '1 -1 1 -1'")
    v.add_argument("--certificate", help="certificate JSON; solved afresh if omitted")
    _add_run_flags(v)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("bench", help="solve a sweep of generated instances, CSV output")
    r.add_argument("family", nargs="?", choices=FAMILIES)
    r.add_argument("--sizes", type=int, nargs="*", default=[],
                   help="L values (n for random); empty sweep gives a header-only CSV")
    r.add_argument("--sigma", type=float, default=1.5)
    r.add_argument("--p", type=float, default=0.5)
    r.add_argument("--seeds", type=int, default=5, help="seeds per size")
    r.add_argument("--seed-start", type=int, default=0)
    r.add_argument("--config", help="JSON file listing the exact sweep")
    _add_run_flags(r)
    r.add_argument("--out")
    r.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"error: instance: {exc}", file=sys.stderr)
    except VerificationRefused as exc:
        print(f"error: verification refused: {exc}", file=sys.stderr)
    except (UsageError, ContractViolation, ProblemTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
