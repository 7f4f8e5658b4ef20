"""Depth-search driver and command-line front end.

Searches increasing approximation depths for a satisfying schema, optionally
refines to the smallest satisfying depth, validates witnesses against the
independent evaluator, and reports machine-readable outcomes.

Exit codes: 0 witness found, 1 exhausted without a witness, 2 inconclusive
(timeouts or solver failures at some depth), 3 input error.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .encoder import encode_fmc
from .formula import CLTLError, Formula, Not, desugar, parse_formula
from .qpa import script_size
from .smt import SolverError, check, emit_smtlib
from .system import CounterSystem, ModelError, parse_dot
from .witness import (ConsistencyReport, check_consistency, concretize,
                      decode, validate_run, witness_to_json)


class InputError(Exception):
    pass


@dataclass
class CheckConfig:
    system: CounterSystem
    formula: Formula
    depths: list[int]
    solver: Optional[list[str]] = None
    timeout: Optional[float] = None
    validate: bool = False
    minimize_depth: bool = False
    parallel: int = 1

    def __post_init__(self):
        if not self.depths:
            raise InputError("empty depth schedule")
        if any(d < 2 for d in self.depths):
            raise InputError("depths start at 2")
        if self.timeout is not None and self.timeout <= 0:
            raise InputError("timeout must be positive")


def doubling_schedule(start: int, stop: int) -> list[int]:
    """Depths start, 2*start, ... capped at stop (stop always included)."""
    if start < 2 or stop < start:
        raise InputError("schedule needs 2 <= start <= max")
    out = []
    d = start
    while d < stop:
        out.append(d)
        d *= 2
    out.append(stop)
    return out


@dataclass
class DepthRecord:
    depth: int
    status: str
    seconds: float
    declarations: int
    assertion_nodes: int
    reason: Optional[str] = None


@dataclass
class CheckOutcome:
    verdict: str                      # 'sat' | 'unsat' | 'unknown'
    depth: Optional[int] = None
    witness: Optional[dict] = None
    validated: Optional[bool] = None
    records: list[DepthRecord] = field(default_factory=list)
    details: Optional[str] = None

    @property
    def max_depth(self) -> Optional[int]:
        return max((r.depth for r in self.records), default=None)

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "depth": self.depth,
            "witness": self.witness,
            "validated": self.validated,
            "details": self.details,
            "records": [
                {"depth": r.depth, "status": r.status, "seconds": r.seconds,
                 "declarations": r.declarations,
                 "assertion_nodes": r.assertion_nodes, "reason": r.reason}
                for r in self.records
            ],
        }

    @staticmethod
    def from_json(doc: dict) -> "CheckOutcome":
        return CheckOutcome(
            verdict=doc["verdict"],
            depth=doc["depth"],
            witness=doc["witness"],
            validated=doc["validated"],
            details=doc["details"],
            records=[DepthRecord(r["depth"], r["status"], r["seconds"],
                                 r["declarations"], r["assertion_nodes"],
                                 r["reason"])
                     for r in doc["records"]],
        )


def _attempt(config: CheckConfig, phi: Formula, depth: int,
             cancel: Optional[threading.Event] = None):
    started = time.monotonic()
    script = encode_fmc(config.system, phi, depth)
    decls, nodes = script_size(script)
    verdict = check(script, command=config.solver, timeout=config.timeout,
                    cancel=cancel)
    record = DepthRecord(depth, verdict.status, time.monotonic() - started,
                         decls, nodes, verdict.reason)
    return verdict, record


def _bundle(config: CheckConfig, phi: Formula, depth: int, model: dict):
    aps = decode(model, config.system, phi, depth)
    witness = concretize(aps, config.system)
    report: Optional[ConsistencyReport] = None
    validated: Optional[bool] = None
    if config.validate:
        report = check_consistency(aps, phi, config.system, witness)
        validated = (report.all_passed
                     and validate_run(config.system, witness.run, phi))
    doc = witness_to_json(witness, config.system, report)
    return doc, validated


def run_check(config: CheckConfig) -> CheckOutcome:
    """Search the depth schedule; first satisfying depth wins.

    Inconclusive depths (timeouts, solver trouble) do not abort the search:
    a witness may still appear at another depth.  With minimization on, a
    hit is refined by a downward linear scan to the smallest depth that
    still admits a witness.
    """
    phi = desugar(config.formula)
    records: list[DepthRecord] = []
    sat_depth: Optional[int] = None
    sat_model: Optional[dict] = None

    if config.parallel > 1:
        sat_depth, sat_model = _parallel_search(config, phi, records)
    else:
        for depth in config.depths:
            verdict, record = _attempt(config, phi, depth)
            records.append(record)
            if verdict.is_sat:
                sat_depth, sat_model = depth, verdict.model
                break

    if sat_model is not None and config.minimize_depth:
        depth = sat_depth - 1
        while depth >= 2:
            verdict, record = _attempt(config, phi, depth)
            records.append(record)
            if not verdict.is_sat:
                break
            sat_depth, sat_model = depth, verdict.model
            depth -= 1

    if sat_model is not None:
        doc, validated = _bundle(config, phi, sat_depth, sat_model)
        return CheckOutcome("sat", depth=sat_depth, witness=doc,
                            validated=validated, records=records)
    if any(r.status == "unknown" for r in records):
        bad = [r for r in records if r.status == "unknown"]
        details = "; ".join(f"depth {r.depth}: {r.reason}" for r in bad)
        return CheckOutcome("unknown", records=records, details=details)
    return CheckOutcome("unsat", records=records)


def _parallel_search(config: CheckConfig, phi: Formula,
                     records: list[DepthRecord]):
    cancel = threading.Event()
    sat: dict = {}
    lock = threading.Lock()

    def task(depth: int):
        verdict, record = _attempt(config, phi, depth, cancel)
        with lock:
            records.append(record)
            if verdict.is_sat:
                prior = sat.get("depth")
                if prior is None or depth < prior:
                    sat["depth"], sat["model"] = depth, verdict.model
                cancel.set()

    with ThreadPoolExecutor(max_workers=config.parallel) as pool:
        futures = [pool.submit(task, d) for d in config.depths]
        for f in futures:
            f.result()
    records.sort(key=lambda r: r.depth)
    return sat.get("depth"), sat.get("model")


def negate_and_check(config: CheckConfig) -> CheckOutcome:
    """Check the negated property; a witness is a counterexample."""
    negated = CheckConfig(config.system, Not(config.formula), config.depths,
                          config.solver, config.timeout, config.validate,
                          config.minimize_depth, config.parallel)
    return run_check(negated)


# ---------------------------------------------------------------------------
# Command line
# ---------------------------------------------------------------------------

def _load_formula(source: str) -> Formula:
    if source.startswith("@"):
        text = Path(source[1:]).read_text()
    else:
        text = source
    return parse_formula(text)


def _parse_search(text: str) -> tuple[int, int]:
    try:
        start, stop = text.split(":")
        return int(start), int(stop)
    except ValueError:
        raise InputError(f"bad search range {text!r}, expected start:max")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flatcheck",
        description="Search flat approximations of a counter system for a "
                    "run satisfying a counting LTL formula.")
    parser.add_argument("--system", required=True,
                        help="counter system in DOT format")
    parser.add_argument("--formula", required=True,
                        help="formula text, or @file to read it from a file")
    parser.add_argument("--depth", type=int,
                        help="check one fixed approximation depth")
    parser.add_argument("--search", metavar="START:MAX",
                        help="doubling depth schedule (default 2:64)")
    parser.add_argument("--solver",
                        help="solver command (default: FLATCHECK_SOLVER, "
                             "z3 on PATH, or the bundled wrapper)")
    parser.add_argument("--timeout", type=float, default=300.0,
                        help="seconds per depth (default 300)")
    parser.add_argument("--validate", action="store_true",
                        help="re-verify witnesses against the independent "
                             "evaluator")
    parser.add_argument("--minimize-depth", action="store_true",
                        help="refine a hit to the smallest satisfying depth")
    parser.add_argument("--negate", action="store_true",
                        help="check the negated formula (counterexamples)")
    parser.add_argument("--json", metavar="PATH",
                        help="write the outcome as JSON")
    parser.add_argument("--emit-smt", metavar="PATH",
                        help="dump the solver script and exit without solving")
    parser.add_argument("--parallel", type=int, default=1,
                        help="probe this many depths concurrently")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        system = parse_dot(Path(args.system).read_text())
        formula = _load_formula(args.formula)
        if args.depth is not None and args.search is not None:
            raise InputError("--depth and --search are mutually exclusive")
        if args.depth is not None:
            depths = [args.depth]
        else:
            start, stop = _parse_search(args.search or "2:64")
            depths = doubling_schedule(start, stop)
        solver = shlex.split(args.solver) if args.solver else None
        config = CheckConfig(system, formula, depths, solver, args.timeout,
                             args.validate, args.minimize_depth,
                             args.parallel)
    except (OSError, CLTLError, ModelError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    if args.emit_smt:
        phi = desugar(Not(formula) if args.negate else formula)
        script = encode_fmc(system, phi, depths[0])
        Path(args.emit_smt).write_text(emit_smtlib(script))
        print(f"wrote solver script for depth {depths[0]} to {args.emit_smt}")
        return 0

    try:
        outcome = (negate_and_check(config) if args.negate
                   else run_check(config))
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    _print_outcome(outcome, negated=args.negate)
    if args.json:
        Path(args.json).write_text(json.dumps(outcome.to_json(), indent=2))
    return {"sat": 0, "unsat": 1, "unknown": 2}[outcome.verdict]


def _print_outcome(outcome: CheckOutcome, negated: bool) -> None:
    for r in outcome.records:
        extra = f" ({r.reason})" if r.reason else ""
        print(f"depth {r.depth:4d}: {r.status:<7}"
              f"{r.seconds:7.2f}s  vars={r.declarations} "
              f"nodes={r.assertion_nodes}{extra}")
    if outcome.verdict == "sat":
        kind = "counterexample" if negated else "witness"
        suffix = ""
        if outcome.validated is True:
            suffix = " (validated)"
        elif outcome.validated is False:
            suffix = " (VALIDATION FAILED)"
        print(f"{kind} found at depth {outcome.depth}{suffix}")
    elif outcome.verdict == "unsat":
        print(f"no witness up to depth {outcome.max_depth}")
    else:
        print(f"inconclusive: {outcome.details}")


if __name__ == "__main__":
    sys.exit(main())
