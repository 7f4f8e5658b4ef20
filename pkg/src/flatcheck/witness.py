"""Decoding solver models into path schemas and re-verifying them.

Decoding never repairs: any inconsistency between a model and the schema
invariants is raised as an error, because it signals an encoder defect.
The consistency checker re-derives the labelling criterion directly on the
decoded schema with unfolded loop copies, and the run validator replays the
lasso against the system semantics and the ground-truth evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .formula import (And, Atom, CounterGuard, Formula, Next, Not,
                      TrueConst, Until, print_formula, subformulae)
from .system import (Configuration, CounterSystem, LassoRun, check_run,
                     guard_satisfied)
from . import oracle as _oracle

MAX_EXPANSION = 200_000


class DecodeError(Exception):
    """Solver model violates a schema invariant (encoder defect)."""

    def __init__(self, message: str, position: Optional[int] = None,
                 family: Optional[str] = None):
        where = f" at position {position}" if position is not None else ""
        fam = f" [{family}]" if family else ""
        super().__init__(f"{message}{where}{fam}")
        self.position = position
        self.family = family


KIND_OUT, KIND_BEGIN, KIND_IN, KIND_END = 0, 1, 2, 3
KIND_NAMES = {0: "out", 1: "begin", 2: "in", 3: "end"}


@dataclass
class ApsPosition:
    kind: int
    origin: str
    labels: frozenset  # closure members labelling this position
    iters: int
    edge_fwd: Optional[int]
    edge_bwd: Optional[int]
    val_first: dict
    val_second: dict
    val_last_kind: dict   # counter -> -1 | 0 | +1
    val_last_pay: dict    # counter -> int (meaningful when kind is 0)


@dataclass
class ApsModel:
    n: int
    positions: list[ApsPosition]
    loops: list[tuple[int, int]]
    closure: list[Formula]
    phi: Formula

    @property
    def last_loop(self) -> tuple[int, int]:
        return self.loops[-1]

    def loop_of(self, i: int) -> Optional[tuple[int, int]]:
        for b, e in self.loops:
            if b <= i <= e:
                return (b, e)
        return None


def _require(cond: bool, message: str, position: Optional[int],
             family: str) -> None:
    if not cond:
        raise DecodeError(message, position, family)


def decode(model: dict, system: CounterSystem, phi: Formula,
           n: int) -> ApsModel:
    """Read a satisfying assignment back into a validated schema."""
    closure = subformulae(phi)
    kinds = [model[f"kind{i}"] for i in range(n)]
    for i, k in enumerate(kinds):
        _require(k in (0, 1, 2, 3), f"kind value {k} out of range", i, "shape")
    _require(kinds[0] in (KIND_OUT, KIND_BEGIN),
             "loop not opened (first position is inside a loop)", 0, "shape")
    _require(kinds[n - 1] == KIND_END,
             "final position does not close a loop", n - 1, "shape")
    for i in range(1, n):
        if kinds[i - 1] in (KIND_END, KIND_OUT):
            _require(kinds[i] in (KIND_OUT, KIND_BEGIN),
                     "loop not opened", i, "shape")
        else:
            _require(kinds[i] in (KIND_IN, KIND_END),
                     "loop not closed", i, "shape")

    loops: list[tuple[int, int]] = []
    begin: Optional[int] = None
    for i, k in enumerate(kinds):
        if k == KIND_BEGIN:
            begin = i
        elif k == KIND_END:
            _require(begin is not None, "loop not opened", i, "shape")
            loops.append((begin, i))
            begin = None
    _require(loops and loops[-1][1] == n - 1,
             "no final loop", n - 1, "shape")

    positions: list[ApsPosition] = []
    for i in range(n):
        oidx = model[f"orig{i}"]
        _require(0 <= oidx < len(system.states),
                 f"origin index {oidx} out of range", i, "origins")
        origin = system.states[oidx]
        labels = frozenset(f for j, f in enumerate(closure)
                           if model[f"lbl{j}_{i}"])
        iters = model[f"iters{i}"]
        edge_fwd = model.get(f"efwd{i}") if i >= 1 else None
        raw_bwd = model[f"ebwd{i}"]
        edge_bwd = raw_bwd if kinds[i] == KIND_BEGIN else None
        val_first = {c: model[f"v1_{c}_{i}"] for c in system.counters}
        val_second = {c: model[f"v2_{c}_{i}"] for c in system.counters}
        vlk = {c: model[f"vlk_{c}_{i}"] for c in system.counters}
        vlp = {c: model[f"vl_{c}_{i}"] for c in system.counters}
        for c in system.counters:
            _require(vlk[c] in (-1, 0, 1), "bad extended-value kind", i,
                     "valuations")
        positions.append(ApsPosition(kinds[i], origin, labels, iters,
                                     edge_fwd, edge_bwd, val_first,
                                     val_second, vlk, vlp))

    aps = ApsModel(n, positions, loops, closure, phi)
    _validate_structure(aps, system)
    return aps


def _validate_structure(aps: ApsModel, system: CounterSystem) -> None:
    n, positions = aps.n, aps.positions
    _require(positions[0].origin == system.initial,
             f"origin of first position is {positions[0].origin!r}, "
             f"not the initial state", 0, "origins")
    tids = {t.tid: t for t in system.transitions}
    for i in range(1, n):
        p = positions[i]
        _require(p.edge_fwd in tids, f"unknown forward transition "
                 f"{p.edge_fwd}", i, "transitions")
        t = tids[p.edge_fwd]
        _require(t.source == positions[i - 1].origin
                 and t.target == p.origin,
                 f"forward transition {t.tid} does not connect "
                 f"{positions[i - 1].origin!r} to {p.origin!r}",
                 i, "transitions")
    for b, e in aps.loops:
        p = positions[b]
        _require(p.edge_bwd in tids,
                 f"unknown backward transition {p.edge_bwd}", b, "transitions")
        t = tids[p.edge_bwd]
        _require(t.source == positions[e].origin and t.target == p.origin,
                 f"backward transition {t.tid} does not close the loop "
                 f"[{b}, {e}]", b, "transitions")
    for i in range(n):
        p = positions[i]
        loop = aps.loop_of(i)
        if loop is None:
            _require(p.kind == KIND_OUT, "row inside a loop interval", i,
                     "shape")
            _require(p.iters == 1, f"row with iteration count {p.iters}",
                     i, "iteration-counts")
    for b, e in aps.loops:
        counts = {positions[i].iters for i in range(b, e + 1)}
        _require(len(counts) == 1, "iteration count varies inside a loop",
                 b, "iteration-counts")
        count = counts.pop()
        if (b, e) == aps.last_loop:
            _require(count == 0, f"final loop has iteration count {count}",
                     b, "iteration-counts")
        else:
            _require(count >= 3, f"loop iterated only {count} times "
                     "(front and rear unfoldings need three)", b,
                     "iteration-counts")
    for i in range(n):
        p = positions[i]
        for f in aps.closure:
            if isinstance(f, TrueConst):
                _require(f in p.labels, "constant true not labelled", i,
                         "labels")
            elif isinstance(f, Atom):
                holds = f.name in system.labels.get(p.origin, frozenset())
                _require((f in p.labels) == holds,
                         f"proposition {f.name!r} labelling disagrees with "
                         f"origin {p.origin!r}", i, "labels")


# ---------------------------------------------------------------------------
# Concretization
# ---------------------------------------------------------------------------

@dataclass
class Witness:
    aps: ApsModel
    run: LassoRun
    schema_pos: list[int]  # run position (prefix+period window) -> schema position

    def schema_position_at(self, rp: int) -> int:
        p = len(self.run.prefix)
        if rp < p:
            return self.schema_pos[rp]
        return self.schema_pos[p + (rp - p) % len(self.run.period)]

    def labels_at(self, rp: int) -> frozenset:
        return self.aps.positions[self.schema_position_at(rp)].labels


def balance_trace(witness: Witness, u: Until, anchor: int,
                  steps: int) -> list[int]:
    """Reconstructed balance values from an anchor run position.

    Starts at 0 and adds, per step, the until term's contribution of the
    current position's schema labelling; entry ``k`` is thus the term's
    value over the labels of positions ``anchor .. anchor+k-1``.
    """
    assert u.term is not None
    values = [0]
    for k in range(steps):
        lab = witness.labels_at(anchor + k)
        contribution = sum(c for c, a in u.term.monomials if a in lab)
        values.append(values[-1] + contribution)
    return values


def concretize(aps: ApsModel, system: CounterSystem,
               max_length: int = MAX_EXPANSION) -> Witness:
    """Expand the schema into its lasso run, replaying counter updates.

    Valuations are recomputed from the transition updates, never read from
    the model, then cross-checked against the model's first/second/last
    visit values; any mismatch or guard violation is an encoder defect.
    """
    n, positions = aps.n, aps.positions

    # Schema position sequence of the prefix and the period.
    prefix_pos: list[int] = []
    i = 0
    last_b, last_e = aps.last_loop
    while i < last_b:
        loop = aps.loop_of(i)
        if loop is None:
            prefix_pos.append(i)
            i += 1
        else:
            b, e = loop
            count = positions[b].iters
            if len(prefix_pos) + (e - b + 1) * count > max_length:
                raise DecodeError("expansion exceeds the length budget",
                                  b, "expansion")
            for _ in range(count):
                prefix_pos.extend(range(b, e + 1))
            i = e + 1
    period_pos = list(range(last_b, last_e + 1))

    def step_tid(schema_from: int, schema_to: int) -> int:
        if schema_to == schema_from + 1:
            tid = positions[schema_to].edge_fwd
        else:
            tid = positions[schema_to].edge_bwd
        assert tid is not None
        return tid

    all_pos = prefix_pos + period_pos
    trans_ids: list[int] = []
    for k in range(len(all_pos)):
        nxt = all_pos[k + 1] if k + 1 < len(all_pos) else period_pos[0]
        trans_ids.append(step_tid(all_pos[k], nxt))

    configs: list[Configuration] = []
    val = system.zero_valuation()
    visits: dict[int, list[dict]] = {}
    for k, sp in enumerate(all_pos):
        config = Configuration.make(positions[sp].origin, dict(val))
        configs.append(config)
        visits.setdefault(sp, []).append(config.as_dict())
        t = system.transition(trans_ids[k])
        if t.source != positions[sp].origin:
            raise DecodeError(
                f"transition {t.tid} does not leave {positions[sp].origin!r}",
                sp, "transitions")
        for name, amount in t.update:
            val[name] += amount
        for g in t.guards:
            if not guard_satisfied(g, val):
                raise DecodeError(
                    "selected transition guard fails on the replayed run",
                    sp, "guards")

    p = len(prefix_pos)
    run = LassoRun(configs[:p], configs[p:], trans_ids[:p], trans_ids[p:])
    run.bind_system(system)

    _cross_check(aps, system, run, visits)
    failure = check_run(system, run)
    if failure is not None:
        raise DecodeError(f"replayed run is invalid: {failure}", None, "run")
    return Witness(aps, run, all_pos)


def _cross_check(aps: ApsModel, system: CounterSystem, run: LassoRun,
                 visits: dict) -> None:
    drift = run.drift()
    last_b, last_e = aps.last_loop
    for i, p in enumerate(aps.positions):
        seen = visits.get(i, [])
        if not seen:
            raise DecodeError("position never visited", i, "expansion")
        if seen[0] != p.val_first:
            raise DecodeError(
                f"first-visit valuation mismatch: replay {seen[0]}, "
                f"model {p.val_first}", i, "valuations")
        on_last = last_b <= i <= last_e
        if len(seen) > 1:
            if seen[1] != p.val_second:
                raise DecodeError("second-visit valuation mismatch", i,
                                  "valuations")
        elif on_last:
            second = {c: seen[0][c] + drift[c] for c in system.counters}
            if second != p.val_second:
                raise DecodeError("second-visit valuation mismatch on the "
                                  "final loop", i, "valuations")
        if on_last:
            for c in system.counters:
                expected = 0 if drift[c] == 0 else (1 if drift[c] > 0 else -1)
                if p.val_last_kind[c] != expected:
                    raise DecodeError(
                        f"final-loop limit kind for {c!r} is "
                        f"{p.val_last_kind[c]}, drift says {expected}",
                        i, "valuations")
                if drift[c] == 0 and p.val_last_pay[c] != seen[0][c]:
                    raise DecodeError(
                        f"final-loop limit payload mismatch for {c!r}", i,
                        "valuations")
        else:
            for c in system.counters:
                if p.val_last_kind[c] != 0:
                    raise DecodeError(
                        f"non-final position carries an infinite value for "
                        f"{c!r}", i, "valuations")
                if p.val_last_pay[c] != seen[-1][c]:
                    raise DecodeError(
                        f"last-visit valuation mismatch for {c!r}: replay "
                        f"{seen[-1][c]}, model {p.val_last_pay[c]}", i,
                        "valuations")


# ---------------------------------------------------------------------------
# Consistency re-verification
# ---------------------------------------------------------------------------

@dataclass
class ReportEntry:
    position: int
    formula: Formula
    passed: bool
    clause: str


@dataclass
class ConsistencyReport:
    entries: list[ReportEntry]

    @property
    def all_passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def failures(self) -> list[ReportEntry]:
        return [e for e in self.entries if not e.passed]

    def result(self, position: int, formula: Formula) -> bool:
        for e in self.entries:
            if e.position == position and e.formula == formula:
                return e.passed
        raise KeyError((position, formula))


@dataclass
class _MatState:
    schema_pos: int
    labels: frozenset
    origin: str
    loop: Optional[int]          # loop id when on a loop body
    run_positions: list[int]     # concrete occurrences (finite part)
    tail: Optional[tuple[int, int]]  # (first tail occurrence, stride)


class _Materialized:
    """Schema with front/rear rows unfolded into explicit states.

    Loop bodies keep their interior occurrences; their front copies carry
    the first traversal and rear copies the final one, so every non-loop
    state has a unique finite occurrence except on the forever loop, whose
    body occurrences continue with a fixed stride.
    """

    def __init__(self, aps: ApsModel, witness: Witness,
                 system: CounterSystem):
        self.aps = aps
        self.system = system
        self.run = witness.run
        self.schema_of_run = witness.schema_pos
        self.states: list[_MatState] = []
        self.succ: list[list[int]] = []
        self.loop_members: dict[int, list[int]] = {}
        self._build()

    def _build(self) -> None:
        aps = self.aps
        positions = aps.positions
        run_positions: dict[int, list[int]] = {}
        for rp, sp in enumerate(self.schema_of_run):
            run_positions.setdefault(sp, []).append(rp)
        period_len = aps.last_loop[1] - aps.last_loop[0] + 1

        def add_state(sp: int, loop: Optional[int], occ: list[int],
                      tail: Optional[tuple[int, int]]) -> int:
            p = positions[sp]
            self.states.append(_MatState(sp, p.labels, p.origin, loop, occ,
                                         tail))
            return len(self.states) - 1

        i = 0
        loop_id = 0
        while i < aps.n:
            loop = aps.loop_of(i)
            if loop is None:
                add_state(i, None, run_positions[i], None)
                i += 1
                continue
            b, e = loop
            width = e - b + 1
            is_last = (b, e) == aps.last_loop
            occs = {sp: run_positions[sp] for sp in range(b, e + 1)}
            # Front copy: first traversal.
            for sp in range(b, e + 1):
                add_state(sp, None, [occs[sp][0]], None)
            # Body: interior traversals (all but first and, when finite,
            # last); on the forever loop the tail continues with the period
            # stride.
            members = []
            for sp in range(b, e + 1):
                if is_last:
                    first_interior = occs[sp][0] + period_len
                    members.append(add_state(sp, loop_id, [],
                                             (first_interior, period_len)))
                else:
                    interior = occs[sp][1:-1]
                    members.append(add_state(sp, loop_id, interior, None))
            self.loop_members[loop_id] = members
            if not is_last:
                for sp in range(b, e + 1):
                    add_state(sp, None, [occs[sp][-1]], None)
            loop_id += 1
            i = e + 1

        count = len(self.states)
        self.succ = [[] for _ in range(count)]
        for idx in range(count - 1):
            self.succ[idx].append(idx + 1)
        for members in self.loop_members.values():
            self.succ[members[-1]].append(members[0])
        # The final materialized state is the forever loop's body end; its
        # only successor is the body start, already added above.
        self.reach_cache: dict[int, frozenset] = {}

    def reachable(self, idx: int) -> frozenset:
        if idx in self.reach_cache:
            return self.reach_cache[idx]
        seen = set()
        frontier = [idx]
        while frontier:
            x = frontier.pop()
            if x in seen:
                continue
            seen.add(x)
            frontier.extend(self.succ[x])
        result = frozenset(seen)
        self.reach_cache[idx] = result
        return result

    # -- run-level helpers ------------------------------------------------

    def run_label_positions(self) -> int:
        return len(self.run.prefix) + len(self.run.period)

    def labels_at_run(self, rp: int) -> frozenset:
        p, L = len(self.run.prefix), len(self.run.period)
        if rp < p:
            sp = self.schema_of_run[rp]
        else:
            sp = self.schema_of_run[p + (rp - p) % L]
        return self.aps.positions[sp].labels

    def witness_view(self) -> Witness:
        return Witness(self.aps, self.run, self.schema_of_run)


def check_consistency(aps: ApsModel, phi: Formula, system: CounterSystem,
                      witness: Optional[Witness] = None) -> ConsistencyReport:
    """Re-verify the labelling criterion clause by clause on the schema.

    Front and rear rows are materialized explicitly; counting clauses are
    justified by balance values recomputed over the replayed run.
    """
    if witness is None:
        witness = concretize(aps, system)
    mat = _Materialized(aps, witness, system)
    closure = subformulae(phi)
    memo: dict[tuple[int, Formula], tuple[bool, str]] = {}

    def consistent(idx: int, f: Formula) -> tuple[bool, str]:
        key = (idx, f)
        if key in memo:
            return memo[key]
        memo[key] = (True, "assumed")  # cut self-reference through loops
        result = _check_state(mat, idx, f, consistent)
        memo[key] = result
        return result

    entries: list[ReportEntry] = []
    per_position: dict[tuple[int, Formula], bool] = {}
    for idx in range(len(mat.states)):
        for f in closure:
            ok, clause = consistent(idx, f)
            sp = mat.states[idx].schema_pos
            prev = per_position.get((sp, f), True)
            per_position[(sp, f)] = prev and ok
            if not ok:
                entries.append(ReportEntry(sp, f, False, clause))
    for sp in range(aps.n):
        for f in closure:
            if per_position.get((sp, f), True):
                entries.append(ReportEntry(sp, f, True, "ok"))
    entries.sort(key=lambda e: (e.position, str(e.formula)))
    return ConsistencyReport(entries)


def _check_state(mat: _Materialized, idx: int, f: Formula,
                 rec: Callable) -> tuple[bool, str]:
    state = mat.states[idx]
    labelled = f in state.labels
    if isinstance(f, (TrueConst, Atom)):
        if isinstance(f, TrueConst):
            return (labelled, "constant")
        holds = f.name in mat.system.labels.get(state.origin, frozenset())
        return (labelled == holds, "proposition")
    if isinstance(f, CounterGuard):
        return _check_guard(mat, idx, f)
    if isinstance(f, Not):
        ok = labelled == (f.child not in state.labels)
        return (ok, "boolean-negation")
    if isinstance(f, And):
        ok = labelled == (f.left in state.labels and f.right in state.labels)
        return (ok, "boolean-conjunction")
    if isinstance(f, Next):
        want = labelled
        for s in mat.succ[idx]:
            if (f.child in mat.states[s].labels) != want:
                return (False, "next-successor")
        return (True, "next-successor")
    if isinstance(f, Until):
        return _check_until(mat, idx, f, rec)
    return (False, "unknown-node")


def _occurrence_values(mat: _Materialized, idx: int):
    """(concrete valuations, optional (base valuation, stride drift))."""
    state = mat.states[idx]
    run = mat.run
    concrete = [run.config_at(rp).as_dict() for rp in state.run_positions]
    tail = None
    if state.tail is not None:
        first, _stride = state.tail
        tail = (run.config_at(first).as_dict(), run.drift())
    return concrete, tail


def _check_guard(mat: _Materialized, idx: int,
                 f: CounterGuard) -> tuple[bool, str]:
    state = mat.states[idx]
    labelled = f in state.labels
    concrete, tail = _occurrence_values(mat, idx)

    def value(theta: dict) -> int:
        return sum(c * theta[a] for c, a in f.term.monomials)

    for theta in concrete:
        if (value(theta) >= f.bound) != labelled:
            return (False, "guard-at-occurrence")
    if tail is not None:
        base, drift = tail
        d = sum(c * drift[a] for c, a in f.term.monomials)
        v = value(base)
        holds_forever = v >= f.bound and d >= 0
        fails_forever = v < f.bound and d <= 0
        if labelled and not holds_forever:
            return (False, "guard-at-occurrence")
        if not labelled and not fails_forever:
            return (False, "guard-at-occurrence")
    return (True, "guard-at-occurrence")


def _max_witness_value(mat: _Materialized, anchor_rp: int,
                       u: Until) -> tuple[Optional[int], bool]:
    """Best balance value over schema-labelled witnesses from an anchor.

    Returns (best finite value or None, growth flag); the growth flag marks
    an unbounded improvement through the forever loop.
    """
    assert u.term is not None
    window = mat.run_label_positions()
    L = len(mat.run.period)
    horizon = window + L  # one wrap-around copy

    def labels(rp: int) -> frozenset:
        return mat.labels_at_run(rp)

    best: Optional[int] = None
    value = 0
    chain_alive = True
    for rp in range(anchor_rp, horizon):
        lab = labels(rp)
        if u.right in lab:
            if best is None or value > best:
                best = value
        if u.left not in lab:
            chain_alive = False
            break
        value += sum(c for c, a in u.term.monomials if a in lab)
    growth = False
    if chain_alive:
        tail_drift = sum(c * sum(1 for r in range(L)
                                 if a in labels(window - L + r))
                         for c, a in u.term.monomials)
        tail_psi = any(u.right in labels(window - L + r) for r in range(L))
        growth = tail_psi and tail_drift > 0
    return best, growth


def _check_until(mat: _Materialized, idx: int, u: Until,
                 rec: Callable) -> tuple[bool, str]:
    state = mat.states[idx]
    labelled = u in state.labels

    # Subformula consistency everywhere is a precondition of the criterion.
    strict = [f for f in subformulae(u) if f != u]
    for g in strict:
        for other in range(len(mat.states)):
            ok, _ = rec(other, g)
            if not ok:
                return (False, "until-subformula")

    if state.loop is not None:
        members = mat.loop_members[state.loop]
        width = len(members)
        front_idx = idx - width
        ok_front, _ = rec(front_idx, u)
        is_last = mat.states[idx].tail is not None
        if not ok_front:
            return (False, "until-loop-inheritance")
        if not is_last:
            rear_idx = idx + width
            ok_rear, _ = rec(rear_idx, u)
            if not ok_rear:
                return (False, "until-loop-inheritance")
        return (True, "until-loop-inheritance")

    # Forever-loop escape: positive term effect with the chain alive and a
    # witness on the loop proves the formula at every reachable anchor.
    assert u.term is not None
    last_members = mat.loop_members[max(mat.loop_members)]
    tail_labels = [mat.states[m].labels for m in last_members]
    tail_eff = sum(c * sum(1 for lab in tail_labels if a in lab)
                   for c, a in u.term.monomials)
    tail_psi = any(u.right in lab for lab in tail_labels)
    chain_global = all(u.left in mat.states[s].labels
                       for s in mat.reachable(idx))
    if labelled and tail_eff > 0 and tail_psi and chain_global:
        return (True, "until-final-loop")

    anchors = list(state.run_positions)
    if state.tail is not None:
        anchors.append(state.tail[0])
    for rp in anchors:
        best, growth = _max_witness_value(mat, rp, u)
        satisfied = growth or (best is not None and best >= u.bound)
        if satisfied != labelled:
            return (False, "until-witness-value")
    return (True, "until-witness-value")


# ---------------------------------------------------------------------------
# Validation and presentation
# ---------------------------------------------------------------------------

def validate_run(system: CounterSystem, run: LassoRun, phi: Formula,
                 evaluator: Optional[Callable] = None) -> bool:
    """True iff the lasso is a run of the system and satisfies the formula."""
    try:
        failure = check_run(system, run)
    except Exception:
        return False
    if failure is not None:
        return False
    evaluate = evaluator or _oracle.eval_cltl
    return bool(evaluate(system, run, phi))


def witness_to_json(witness: Witness, system: CounterSystem,
                    report: Optional[ConsistencyReport] = None) -> dict:
    aps, run = witness.aps, witness.run
    doc = {
        "depth": aps.n,
        "loops": [list(loop) for loop in aps.loops],
        "positions": [
            {
                "kind": KIND_NAMES[p.kind],
                "origin": p.origin,
                "iterations": p.iters,
                "labels": sorted(print_formula(f) for f in p.labels),
                "val_first": p.val_first,
                "val_second": p.val_second,
                "val_last": {
                    c: (p.val_last_pay[c] if p.val_last_kind[c] == 0
                        else ("+inf" if p.val_last_kind[c] > 0 else "-inf"))
                    for c in system.counters
                },
            }
            for p in aps.positions
        ],
        "run": {
            "prefix": [
                {"state": cfg.state, "valuation": cfg.as_dict()}
                for cfg in run.prefix
            ],
            "period": [
                {"state": cfg.state, "valuation": cfg.as_dict()}
                for cfg in run.period
            ],
            "prefix_transitions": list(run.prefix_trans),
            "period_transitions": list(run.period_trans),
        },
    }
    if report is not None:
        doc["consistency"] = {
            "all_passed": report.all_passed,
            "failures": [
                {"position": e.position, "formula": print_formula(e.formula),
                 "clause": e.clause}
                for e in report.failures()
            ],
        }
    return doc


def format_trace(witness: Witness, limit: int = 40) -> str:
    """Human-readable prefix/period listing derived from the witness."""
    run = witness.run
    lines = []
    for i, cfg in enumerate(run.prefix[:limit]):
        vals = ", ".join(f"{c}={v}" for c, v in cfg.valuation)
        lines.append(f"  {i:4d}  {cfg.state:<12} {vals}")
    if len(run.prefix) > limit:
        lines.append(f"  ... ({len(run.prefix) - limit} more prefix steps)")
    lines.append("  --- period repeats forever ---")
    base = len(run.prefix)
    for j, cfg in enumerate(run.period):
        vals = ", ".join(f"{c}={v}" for c, v in cfg.valuation)
        lines.append(f"  {base + j:4d}  {cfg.state:<12} {vals}")
    return "\n".join(lines)
