"""Ground-truth evaluation of counting LTL on lasso runs, plus brute-force
witness search over bounded flat run shapes.

Evaluation is exact: along the repeated period every guard value is affine
in the copy index, so truth stabilizes after a computable number of copies.
Formulas are evaluated over a window of prefix plus stabilized copies; for
counting untils a one-copy extension plus a growth test decides witnesses
beyond the window.  The enumerator realizes run shapes
``u0 v0^k0 ... um vm^omega`` directly and serves as the independent
reference for the SMT pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

from .formula import (And, Atom, CounterGuard, Formula, Next, Not, TrueConst,
                      Until, desugar, subformulae)
from .system import (Configuration, CounterSystem, LassoRun, check_run,
                     guard_satisfied)


class OracleError(Exception):
    pass


class BudgetError(OracleError):
    """Enumeration or evaluation exceeded its explicit work budget."""


MAX_WINDOW = 200_000


# ---------------------------------------------------------------------------
# Windowed evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalTable:
    """Truth of every closure member over a finite window of run positions.

    The window covers the prefix plus enough period copies that every truth
    value in the final copy repeats at all later copies.
    """

    closure: list[Formula]
    truth: dict[Formula, list[bool]]
    prefix_len: int
    period_len: int
    copies: int

    @property
    def window(self) -> int:
        return self.prefix_len + self.period_len * self.copies

    def stable_truth(self, f: Formula, residue: int) -> bool:
        return self.truth[f][self.window - self.period_len + residue]


def stabilization_copies(system: CounterSystem, run: LassoRun,
                         guards: list[CounterGuard]) -> int:
    """Copies after which every guard's truth is constant per residue.

    A guard term's value at a fixed residue is affine in the copy index
    (base + copy * drift) and therefore flips at most once.
    """
    run.bind_system(system)
    drift = run.drift()
    p, L = len(run.prefix), len(run.period)
    worst = 0
    for g in guards:
        d = sum(c * drift[a] for c, a in g.term.monomials)
        if d == 0:
            continue
        for r in range(L):
            theta = run.config_at(p + r).as_dict()
            v0 = sum(c * theta[a] for c, a in g.term.monomials)
            if d > 0:
                flip = 0 if v0 >= g.bound else math.ceil((g.bound - v0) / d)
            else:
                flip = 0 if v0 < g.bound else (v0 - g.bound) // (-d) + 1
            worst = max(worst, flip)
    return worst


def build_eval_table(system: CounterSystem, run: LassoRun, phi: Formula,
                     extra_copies: int = 0) -> EvalTable:
    """Exact truth table for ``phi``'s closure over a stabilized window."""
    phi = desugar(phi)
    closure = subformulae(phi)
    guards = [f for f in closure if isinstance(f, CounterGuard)]
    for g in guards:
        for a in g.term.atoms():
            if a not in system.counters:
                raise OracleError(f"formula guard uses unknown counter {a!r}")
    run.bind_system(system)
    p, L = len(run.prefix), len(run.period)
    copies = max(2, stabilization_copies(system, run, guards) + 3) + extra_copies
    window = p + L * copies
    if window > MAX_WINDOW:
        raise BudgetError(
            f"stabilization window of {window} positions exceeds the "
            f"{MAX_WINDOW} budget")

    states = [run.state_at(i) for i in range(window)]
    truth: dict[Formula, list[bool]] = {}
    for f in closure:
        if isinstance(f, TrueConst):
            truth[f] = [True] * window
        elif isinstance(f, Atom):
            truth[f] = [f.name in system.labels.get(s, frozenset())
                        for s in states]
        elif isinstance(f, CounterGuard):
            row = []
            for i in range(window):
                theta = run.config_at(i).as_dict()
                val = sum(c * theta[a] for c, a in f.term.monomials)
                row.append(val >= f.bound)
            truth[f] = row
        elif isinstance(f, Not):
            truth[f] = [not v for v in truth[f.child]]
        elif isinstance(f, And):
            truth[f] = [a and b for a, b in zip(truth[f.left], truth[f.right])]
        elif isinstance(f, Next):
            child = truth[f.child]
            # Position `window` wraps into the stable final copy.
            truth[f] = child[1:] + [child[window - L]]
        elif isinstance(f, Until):
            truth[f] = _until_row(f, truth, window, L)
        else:
            raise OracleError(f"non-core formula {f!r} (desugar first)")
    return EvalTable(closure, truth, p, L, copies)


def _until_row(f: Until, truth: dict, window: int, L: int) -> list[bool]:
    assert f.term is not None
    chi, psi = truth[f.left], truth[f.right]
    monos = [(c, truth[a]) for c, a in f.term.monomials]
    base = window - L

    def contribution(j: int) -> int:
        return sum(c for c, row in monos if row[j])

    tail_psi = any(psi[base + r] for r in range(L))
    tail_drift = sum(contribution(base + r) for r in range(L))

    out = []
    for i in range(window):
        value = 0
        verdict: Optional[bool] = None
        for j in range(i, window):
            if psi[j] and value >= f.bound:
                verdict = True
                break
            if not chi[j]:
                verdict = False
                break
            value += contribution(j)
        if verdict is None:
            # The chain survived to the window edge.  Scan one more period
            # copy through the stable truths; witnesses even further out only
            # improve when the term's per-copy growth is positive.
            for r in range(L):
                j = base + r
                if psi[j] and value >= f.bound:
                    verdict = True
                    break
                if not chi[j]:
                    verdict = False
                    break
                value += contribution(j)
            if verdict is None:
                verdict = tail_psi and tail_drift > 0
        out.append(verdict)
    return out


def eval_cltl(system: CounterSystem, run: LassoRun, phi: Formula,
              position: int = 0) -> bool:
    """Exact truth of ``phi`` at a position of the run."""
    table = build_eval_table(system, run, phi)
    core = desugar(phi)
    if position >= table.window:
        raise OracleError("position outside the evaluation window")
    return table.truth[core][position]


# ---------------------------------------------------------------------------
# Flat-shape enumeration
# ---------------------------------------------------------------------------

@dataclass
class SchemaShape:
    """A run shape as segments over transition ids.

    Segments: ``('path', [tid, ...])`` straight-line steps,
    ``('loop', entry_tid_or_None, [cycle tids], k)`` for an iterated cycle,
    and the final ``('omega', entry_tid_or_None, [cycle tids])``.  A cycle's
    transition list starts at its first state and ends with the wrap back to
    it; the entry transition is None only when the cycle starts the run.
    """

    segments: list

    def schema_states(self) -> int:
        total = 0
        for seg in self.segments:
            if seg[0] == "path":
                total += len(seg[1])
            else:
                total += len(seg[2])
        # The initial state is charged implicitly by the leading path/loop.
        return total


class _Work:
    def __init__(self, budget: int):
        self.left = budget

    def spend(self, amount: int = 1) -> None:
        self.left -= amount
        if self.left < 0:
            raise BudgetError("enumeration work budget exceeded")


def _all_cycles(system: CounterSystem, max_len: int,
                work: _Work) -> dict[str, list[list[int]]]:
    """Transition walks returning to their start state, length <= max_len."""
    out: dict[str, list[list[int]]] = {s: [] for s in system.states}
    for start in system.states:

        def dfs(state: str, acc: list[int]) -> None:
            work.spend()
            for t in system.out_transitions(state):
                if t.target == start:
                    out[start].append(acc + [t.tid])
                if len(acc) + 1 < max_len:
                    dfs(t.target, acc + [t.tid])

        dfs(start, [])
    return out


def _shapes(system: CounterSystem, max_len: int, max_iter: int,
            work: _Work) -> Iterator[SchemaShape]:
    """All shapes whose total segment-state count is <= max_len.

    The initial state itself costs one unit unless the run opens with a
    cycle (then it is the cycle's first state, already counted).
    """
    cycles = _all_cycles(system, max_len, work)

    def rec(state: str, budget: int, acc: list) -> Iterator[SchemaShape]:
        work.spend()
        for t in system.out_transitions(state):
            for cyc in cycles[t.target]:
                if len(cyc) <= budget:
                    yield SchemaShape(acc + [("omega", t.tid, list(cyc))])
        if budget >= 1:
            for t in system.out_transitions(state):
                yield from rec(t.target, budget - 1, _extend_path(acc, t.tid))
        for t in system.out_transitions(state):
            for cyc in cycles[t.target]:
                if len(cyc) <= budget:
                    exit_state = system.transition(cyc[-1]).source
                    for k in range(1, max_iter + 1):
                        yield from rec(exit_state, budget - len(cyc),
                                       acc + [("loop", t.tid, list(cyc), k)])

    start = system.initial
    for cyc in cycles[start]:
        if len(cyc) <= max_len:
            yield SchemaShape([("omega", None, list(cyc))])
            exit_state = system.transition(cyc[-1]).source
            for k in range(1, max_iter + 1):
                yield from rec(exit_state, max_len - len(cyc),
                               [("loop", None, list(cyc), k)])
    if max_len >= 1:
        yield from rec(start, max_len - 1, [])


def _extend_path(acc: list, tid: int) -> list:
    if acc and acc[-1][0] == "path":
        return acc[:-1] + [("path", acc[-1][1] + [tid])]
    return acc + [("path", [tid])]


def expand_shape(system: CounterSystem,
                 shape: SchemaShape) -> Optional[LassoRun]:
    """Instantiate a shape into a lasso run; None when a guard fails."""
    prefix: list[Configuration] = []
    prefix_trans: list[int] = []
    config = Configuration.make(system.initial, system.zero_valuation())

    def apply_step(tid: int) -> bool:
        nonlocal config
        t = system.transition(tid)
        val = config.as_dict()
        for name, k in t.update:
            val[name] += k
        for g in t.guards:
            if not guard_satisfied(g, val):
                return False
        prefix.append(config)
        prefix_trans.append(tid)
        config = Configuration.make(t.target, val)
        return True

    def loop_steps(cyc: list[int], k: int) -> list[int]:
        # Arriving at the cycle's first state: traverse its body, then wrap
        # and traverse again for each additional iteration.
        steps = list(cyc[:-1])
        for _ in range(k - 1):
            steps.append(cyc[-1])
            steps.extend(cyc[:-1])
        return steps

    for seg in shape.segments[:-1]:
        if seg[0] == "path":
            steps = seg[1]
        else:
            _, entry, cyc, k = seg
            steps = ([entry] if entry is not None else []) + loop_steps(cyc, k)
        for tid in steps:
            if not apply_step(tid):
                return None

    _, entry, cyc = shape.segments[-1]
    if entry is not None:
        if not apply_step(entry):
            return None
    period: list[Configuration] = []
    period_trans: list[int] = []
    for tid in cyc:
        t = system.transition(tid)
        val = config.as_dict()
        for name, k in t.update:
            val[name] += k
        for g in t.guards:
            if not guard_satisfied(g, val):
                return None
        period.append(config)
        period_trans.append(tid)
        config = Configuration.make(t.target, val)
    run = LassoRun(prefix, period, prefix_trans, period_trans)
    if check_run(system, run) is not None:
        return None
    return run


def _guard_enumeration(system: CounterSystem, max_schema_len: int) -> None:
    if len(system.states) > 8:
        raise BudgetError("enumeration guard: at most 8 states")
    if max_schema_len > 12:
        raise BudgetError("enumeration guard: schema length at most 12")


def enumerate_flat_witness(system: CounterSystem, max_schema_len: int,
                           max_iter: int, phi: Formula,
                           work_budget: int = 5_000_000) -> Optional[LassoRun]:
    """First bounded-shape run satisfying ``phi``, or None."""
    _guard_enumeration(system, max_schema_len)
    phi = desugar(phi)
    work = _Work(work_budget)
    for shape in _shapes(system, max_schema_len, max_iter, work):
        run = expand_shape(system, shape)
        if run is None:
            continue
        if eval_cltl(system, run, phi):
            return run
    return None


# ---------------------------------------------------------------------------
# Shape membership
# ---------------------------------------------------------------------------

def fa_member(prefix_states: list[str], period_states: list[str],
              n: int) -> bool:
    """Whether the lasso's state word fits a shape of total length <= n."""
    if not period_states or n <= 0:
        return False
    p, L = len(prefix_states), len(period_states)

    def state_at(i: int) -> str:
        return prefix_states[i] if i < p else period_states[(i - p) % L]

    def canon(pos: int) -> int:
        return pos if pos < p else p + (pos - p) % L

    def tail_matches(q: int, block_len: int) -> bool:
        limit = max(p - q, 0) + math.lcm(block_len, L) + max(block_len, L)
        return all(state_at(q + j) == state_at(q + (j % block_len))
                   for j in range(limit))

    seen: set[tuple[int, int]] = set()

    def match(pos: int, budget: int) -> bool:
        pos = canon(pos)
        if budget <= 0 or (pos, budget) in seen:
            return False
        seen.add((pos, budget))
        # Finish with u . v^omega inside the remaining budget.
        for ulen in range(0, budget):
            for vlen in range(1, budget - ulen + 1):
                if tail_matches(pos + ulen, vlen):
                    return True
        # One path state.
        if match(pos + 1, budget - 1):
            return True
        # An iterated block of length vlen, repeated k >= 1 times.
        for vlen in range(1, budget + 1):
            block = [state_at(pos + j) for j in range(vlen)]
            k = 1
            k_cap = max(p - pos, 0) // vlen + L // math.gcd(vlen, L) + 2
            while k <= k_cap:
                nxt = pos + k * vlen
                if [state_at(pos + (k - 1) * vlen + j) for j in range(vlen)] != block:
                    break
                if match(nxt, budget - vlen):
                    return True
                k += 1
        return False

    return match(0, n)


# ---------------------------------------------------------------------------
# Negative-verdict stability
# ---------------------------------------------------------------------------

def negative_is_stable(system: CounterSystem, phi: Formula,
                       max_schema_len: int, max_iter: int,
                       work_budget: int = 5_000_000) -> bool:
    """Confirm no enumerated shape could turn satisfying at higher counts.

    Conservative limit analysis at the iteration boundary: the negative
    verdict is stable only if no guard value is still drifting toward its
    bound past any pumpable cycle and no counting until can keep growing a
    witness value through a fully chain-labelled cycle.
    """
    _guard_enumeration(system, max_schema_len)
    phi = desugar(phi)
    closure = subformulae(phi)
    guard_terms = [(f.term.monomials, f.bound) for f in closure
                   if isinstance(f, CounterGuard)]
    for t in system.transitions:
        guard_terms.extend((g.monomials, g.bound) for g in t.guards)
    untils = [f for f in closure if isinstance(f, Until)]
    work = _Work(work_budget)
    # Enumerate structural skeletons once (all loop counts 1), then analyze
    # each at the iteration boundary: those instantiations carry the extreme
    # values, and interior counts are covered by the same drift reasoning.
    for skeleton in _shapes(system, max_schema_len, 1, work):
        loops = [seg for seg in skeleton.segments[:-1] if seg[0] == "loop"]
        if not loops:
            continue
        shape = SchemaShape([
            ("loop", seg[1], seg[2], max_iter) if seg[0] == "loop" else seg
            for seg in skeleton.segments])
        run = expand_shape(system, shape)
        if run is None:
            if _pumping_could_recover(system, shape, guard_terms):
                return False
            continue
        if not _boundary_shape_stable(system, run, shape, phi,
                                      guard_terms, untils):
            return False
    return True


def _loop_spans(shape: SchemaShape) -> list[tuple[int, list[int], int]]:
    """(first run position on the cycle, cycle tids, k) per iterated loop."""
    spans = []
    pos = 0  # position index of the current state; 0 is the initial state
    for seg in shape.segments[:-1]:
        if seg[0] == "path":
            pos += len(seg[1])
        else:
            _, entry, cyc, k = seg
            start = pos + (1 if entry is not None else 0)
            spans.append((start, cyc, k))
            pos = start + k * len(cyc) - 1
    return spans


def _cycle_drift(system: CounterSystem, cyc: list[int]) -> dict[str, int]:
    drift = {c: 0 for c in system.counters}
    for tid in cyc:
        for name, k in system.transition(tid).update:
            drift[name] += k
    return drift


def _pumping_could_recover(system: CounterSystem, shape: SchemaShape,
                           guard_terms: list) -> bool:
    # A guard-invalid shape could become valid at higher counts only if some
    # guard term grows along a pumpable cycle.
    for seg in shape.segments[:-1]:
        if seg[0] != "loop":
            continue
        drift = _cycle_drift(system, seg[2])
        for monos, _ in guard_terms:
            if sum(c * drift[a] for c, a in monos) > 0:
                return True
    return False


def _boundary_shape_stable(system: CounterSystem, run: LassoRun,
                           shape: SchemaShape, phi: Formula,
                           guard_terms: list, untils: list) -> bool:
    table = build_eval_table(system, run, phi)
    window = table.window
    for start, cyc, k in _loop_spans(shape):
        drift = _cycle_drift(system, cyc)
        after = start + k * len(cyc)
        for monos, bound in guard_terms:
            d = sum(c * drift[a] for c, a in monos)
            if d == 0:
                continue
            for i in range(after, window):
                theta = run.config_at(i).as_dict()
                v = sum(c * theta[a] for c, a in monos)
                if (d > 0 and v < bound) or (d < 0 and v >= bound):
                    return False
        loop_positions = range(start, after)
        for u in untils:
            assert u.term is not None
            if not all(table.truth[u.left][i] for i in loop_positions):
                continue
            growth = sum(
                c * sum(1 for i in range(start, start + len(cyc))
                        if table.truth[a][i])
                for c, a in u.term.monomials)
            if growth > 0:
                return False
    return True
