"""Counter systems: labelled graphs with guarded integer-counter updates.

Includes a DOT-dialect reader/writer, flatness analysis, and ultimately
periodic runs (lasso runs) with exact validity checking, covering the
infinitely repeated period through per-period drift analysis.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional

from .formula import ParseError, Term, _Parser, _tokenize, print_term


class ModelError(Exception):
    """Invalid counter system or run."""


# ---------------------------------------------------------------------------
# Core structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    tid: int
    source: str
    target: str
    update: tuple[tuple[str, int], ...]  # sorted by counter name, total
    guards: tuple[Term, ...]             # each with bound set, atoms = counters

    def update_of(self, counter: str) -> int:
        for name, k in self.update:
            if name == counter:
                return k
        return 0

    def update_map(self) -> dict[str, int]:
        return dict(self.update)


@dataclass
class CounterSystem:
    states: tuple[str, ...]
    initial: str
    labels: dict[str, frozenset[str]]
    counters: tuple[str, ...]
    transitions: tuple[Transition, ...]

    def validate(self) -> None:
        state_set = set(self.states)
        if len(self.states) != len(state_set):
            raise ModelError("duplicate state ids")
        if self.initial not in state_set:
            raise ModelError(f"initial state {self.initial!r} is not a state")
        counter_set = set(self.counters)
        for t in self.transitions:
            if t.source not in state_set:
                raise ModelError(f"transition {t.tid}: unknown source {t.source!r}")
            if t.target not in state_set:
                raise ModelError(f"transition {t.tid}: unknown target {t.target!r}")
            for name, _ in t.update:
                if name not in counter_set:
                    raise ModelError(f"transition {t.tid}: undeclared counter {name!r}")
            for g in t.guards:
                if g.bound is None:
                    raise ModelError(f"transition {t.tid}: guard without bound")
                for a in g.atoms():
                    if not isinstance(a, str) or a not in counter_set:
                        raise ModelError(
                            f"transition {t.tid}: guard over non-counter {a!r}")
        tids = [t.tid for t in self.transitions]
        if len(tids) != len(set(tids)):
            raise ModelError("duplicate transition ids")

    def transition(self, tid: int) -> Transition:
        for t in self.transitions:
            if t.tid == tid:
                return t
        raise ModelError(f"unknown transition id {tid}")

    def out_transitions(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == state]

    def successors(self, state: str) -> set[str]:
        if state not in self.states:
            raise ModelError(f"unknown state {state!r}")
        return {t.target for t in self.transitions if t.source == state}

    def suc_star(self, state: str) -> set[str]:
        """Reflexive-transitive successor closure."""
        if state not in self.states:
            raise ModelError(f"unknown state {state!r}")
        seen = {state}
        frontier = [state]
        while frontier:
            s = frontier.pop()
            for t in self.transitions:
                if t.source == s and t.target not in seen:
                    seen.add(t.target)
                    frontier.append(t.target)
        return seen

    def zero_valuation(self) -> dict[str, int]:
        return {c: 0 for c in self.counters}


@dataclass(frozen=True)
class Configuration:
    state: str
    valuation: tuple[tuple[str, int], ...]  # sorted by counter name

    @staticmethod
    def make(state: str, valuation: dict[str, int]) -> "Configuration":
        return Configuration(state, tuple(sorted(valuation.items())))

    def value(self, counter: str) -> int:
        for name, v in self.valuation:
            if name == counter:
                return v
        raise ModelError(f"counter {counter!r} missing from valuation")

    def as_dict(self) -> dict[str, int]:
        return dict(self.valuation)


def guard_satisfied(guard: Term, valuation: dict[str, int]) -> bool:
    total = sum(c * valuation[a] for c, a in guard.monomials)
    return total >= guard.bound


def step(system: CounterSystem, config: Configuration, tid: int) -> Configuration:
    """Apply a transition; guards are evaluated on the post-update valuation."""
    t = system.transition(tid)
    if t.source != config.state:
        raise ModelError(
            f"transition {tid} leaves {t.source!r}, not {config.state!r}")
    val = config.as_dict()
    for name, k in t.update:
        val[name] += k
    for g in t.guards:
        if not guard_satisfied(g, val):
            raise ModelError(
                f"guard {print_term(g, g.bound)} violated after transition {tid}")
    return Configuration.make(t.target, val)


# ---------------------------------------------------------------------------
# Label accumulation
# ---------------------------------------------------------------------------

def label_accumulate(path: Iterable[str], labelmap: dict, domain=None,
                     system: Optional[CounterSystem] = None,
                     strict: bool = False) -> dict:
    """Count, per label, the positions whose label set contains it.

    ``labelmap`` maps each position's key (state id or schema position) to its
    label set.  With ``strict`` and a ``system``, consecutive states must be
    connected in the system.
    """
    path = list(path)
    if strict and system is not None:
        for a, b in zip(path, path[1:]):
            if b not in system.successors(a):
                raise ModelError(f"not a path: {a!r} has no edge to {b!r}")
    if domain is None:
        domain = set()
        for labels in labelmap.values():
            domain.update(labels)
    counts = {label: 0 for label in domain}
    for key in path:
        for label in labelmap[key]:
            if label in counts:
                counts[label] += 1
    return counts


# ---------------------------------------------------------------------------
# Flatness
# ---------------------------------------------------------------------------

@dataclass
class FlatVerdict:
    flat: bool
    state: Optional[str] = None
    loop_a: Optional[tuple[str, ...]] = None
    loop_b: Optional[tuple[str, ...]] = None

    def __bool__(self) -> bool:
        return self.flat


def simple_loops_from(system: CounterSystem, start: str,
                      limit: Optional[int] = None) -> list[tuple[str, ...]]:
    """All simple loops (distinct state sequences) beginning at ``start``."""
    loops: list[tuple[str, ...]] = []
    edges: dict[str, set[str]] = {}
    for t in system.transitions:
        edges.setdefault(t.source, set()).add(t.target)

    def dfs(path: list[str]) -> None:
        if limit is not None and len(loops) >= limit:
            return
        here = path[-1]
        for nxt in sorted(edges.get(here, ())):
            if nxt == start:
                loops.append(tuple(path))
                if limit is not None and len(loops) >= limit:
                    return
            if nxt not in path and nxt != start:
                dfs(path + [nxt])

    dfs([start])
    return loops


def is_flat(system: CounterSystem) -> FlatVerdict:
    """Flat iff every state begins at most one simple loop."""
    for s in system.states:
        loops = simple_loops_from(system, s, limit=2)
        if len(loops) >= 2:
            return FlatVerdict(False, s, loops[0], loops[1])
    return FlatVerdict(True)


# ---------------------------------------------------------------------------
# Lasso runs
# ---------------------------------------------------------------------------

@dataclass
class LassoRun:
    """Ultimately periodic run ``prefix . period^omega``.

    Stored configurations cover the prefix and the first period copy; later
    copies follow by adding the per-period counter drift.  ``prefix_trans[i]``
    connects overall position ``i`` to ``i+1``; ``period_trans[j]`` connects
    period offset ``j`` onward, the last one wrapping to the next copy.
    """

    prefix: list[Configuration]
    period: list[Configuration]
    prefix_trans: list[int]
    period_trans: list[int]

    def __post_init__(self):
        if not self.period:
            raise ModelError("lasso period must be non-empty")
        if len(self.prefix_trans) != len(self.prefix):
            raise ModelError("need one transition per prefix position")
        if len(self.period_trans) != len(self.period):
            raise ModelError("need one transition per period position")

    def drift(self) -> dict[str, int]:
        """Counter change over one full period copy (sum of period updates)."""
        return self._drift_cached()

    def _drift_cached(self) -> dict[str, int]:
        if not hasattr(self, "_drift"):
            raise ModelError("drift requires bind_system() first")
        return dict(self._drift)

    def bind_system(self, system: CounterSystem) -> None:
        d = {c: 0 for c in system.counters}
        for tid in self.period_trans:
            for name, k in system.transition(tid).update:
                d[name] += k
        self._drift = d
        self._system = system

    def state_at(self, i: int) -> str:
        p = len(self.prefix)
        if i < p:
            return self.prefix[i].state
        return self.period[(i - p) % len(self.period)].state

    def config_at(self, i: int) -> Configuration:
        p = len(self.prefix)
        if i < p:
            return self.prefix[i]
        j = (i - p) % len(self.period)
        k = (i - p) // len(self.period)
        if k == 0:
            return self.period[j]
        drift = self._drift_cached()
        val = self.period[j].as_dict()
        for c in val:
            val[c] += k * drift[c]
        return Configuration.make(self.period[j].state, val)

    def transition_at(self, i: int) -> int:
        p = len(self.prefix)
        if i < p:
            return self.prefix_trans[i]
        return self.period_trans[(i - p) % len(self.period)]


def check_run(system: CounterSystem, run: LassoRun) -> Optional[str]:
    """None when the lasso is a run of the system, else a diagnostic.

    Checks the initial configuration, every concrete step of the prefix and
    first period copy, and guard satisfaction over all later period copies
    via the affine drift argument (a linear guard holds at every copy iff it
    holds at the first one and its drift is non-negative).
    """
    run.bind_system(system)
    p, L = len(run.prefix), len(run.period)
    first = run.config_at(0)
    if first.state not in set(system.states):
        return f"unknown state {first.state!r}"
    if first.state != system.initial:
        return f"run starts at {first.state!r}, not the initial state"
    if first.as_dict() != system.zero_valuation():
        return "run does not start with the zero valuation"
    known = set(system.states)
    tids = {t.tid for t in system.transitions}
    for i in range(p + L):
        if run.state_at(i) not in known:
            return f"unknown state {run.state_at(i)!r} at position {i}"
        tid = run.transition_at(i)
        if tid not in tids:
            return f"unknown transition id {tid} at position {i}"
        t = system.transition(tid)
        here, nxt = run.config_at(i), run.config_at(i + 1)
        if t.source != here.state or t.target != nxt.state:
            return (f"transition {tid} does not connect {here.state!r} to "
                    f"{nxt.state!r} (position {i})")
        val = here.as_dict()
        for name, k in t.update:
            val[name] += k
        if val != nxt.as_dict():
            return f"valuation mismatch after position {i}"
        for g in t.guards:
            if not guard_satisfied(g, val):
                return (f"guard {print_term(g, g.bound)} violated at "
                        f"position {i}")
    # Later period copies: guard value after each period step is affine in the
    # copy index, so it stays satisfied iff the per-period drift of its term
    # is non-negative (the first copy was checked concretely above).
    drift = run.drift()
    for j in range(L):
        t = system.transition(run.period_trans[j])
        for g in t.guards:
            d = sum(c * drift[a] for c, a in g.monomials)
            if d < 0:
                return (f"guard {print_term(g, g.bound)} on period step {j} "
                        f"eventually fails (negative drift {d})")
    return None


# ---------------------------------------------------------------------------
# DOT dialect
# ---------------------------------------------------------------------------

_UPDATE_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*([+-])=\s*(\d+)\s*$")


def parse_constraint(text: str) -> Term:
    """Parse a linear constraint over counter names, e.g. ``c - 2*d >= 0``."""
    p = _Parser(_tokenize(text))
    term = p.linear_term(counter_atoms=True)
    term, bound = p.relation(term)
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.col)
    return Term(term.monomials, bound)


class _DotScanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def error(self, msg: str):
        raise ParseError(msg, self.line, self.col)

    def _advance(self, n: int) -> None:
        for ch in self.text[self.pos:self.pos + n]:
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
        self.pos += n

    def skip_ws(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance(1)
            elif self.text.startswith("//", self.pos):
                end = self.text.find("\n", self.pos)
                self._advance((end if end != -1 else len(self.text)) - self.pos)
            elif self.text.startswith("#", self.pos):
                end = self.text.find("\n", self.pos)
                self._advance((end if end != -1 else len(self.text)) - self.pos)
            elif self.text.startswith("/*", self.pos):
                end = self.text.find("*/", self.pos)
                if end == -1:
                    self.error("unterminated comment")
                self._advance(end + 2 - self.pos)
            else:
                return

    def peek_sym(self, sym: str) -> bool:
        self.skip_ws()
        return self.text.startswith(sym, self.pos)

    def eat_sym(self, sym: str) -> bool:
        if self.peek_sym(sym):
            self._advance(len(sym))
            return True
        return False

    def expect_sym(self, sym: str) -> None:
        if not self.eat_sym(sym):
            self.error(f"expected {sym!r}")

    def ident(self) -> Optional[str]:
        self.skip_ws()
        if self.pos >= len(self.text):
            return None
        ch = self.text[self.pos]
        if ch == '"':
            end = self.text.find('"', self.pos + 1)
            if end == -1:
                self.error("unterminated string")
            value = self.text[self.pos + 1:end]
            self._advance(end + 1 - self.pos)
            return value
        if ch.isalnum() or ch == "_":
            j = self.pos
            while j < len(self.text) and (self.text[j].isalnum() or self.text[j] == "_"):
                j += 1
            value = self.text[self.pos:j]
            self._advance(j - self.pos)
            return value
        return None


def _split_list(raw: str, sep: str) -> list[str]:
    return [part.strip() for part in raw.split(sep) if part.strip()]


def parse_dot(text: str) -> CounterSystem:
    """Read a counter system from the DOT dialect.

    Node attributes: ``props`` (comma-separated propositions) and ``init``
    (exactly one node carries ``init="true"``).  Edge attributes: ``update``
    (semicolon-separated ``name+=k`` / ``name-=k``) and ``guard``
    (semicolon-separated linear inequalities over counters).  A graph-level
    ``counters="c,d"`` attribute declares counters explicitly; otherwise they
    are inferred from updates and guards.
    """
    sc = _DotScanner(text)
    sc.skip_ws()
    kw = sc.ident()
    if kw != "digraph":
        sc.error("expected 'digraph'")
    name = sc.ident()  # optional graph name
    sc.expect_sym("{")

    order: list[str] = []
    labels: dict[str, frozenset[str]] = {}
    declared_counters: Optional[list[str]] = None
    initial: Optional[str] = None
    raw_edges: list[tuple[str, str, dict]] = []

    def read_attrs() -> dict:
        attrs: dict = {}
        if not sc.eat_sym("["):
            return attrs
        while True:
            if sc.eat_sym("]"):
                return attrs
            key = sc.ident()
            if key is None:
                sc.error("expected attribute name")
            sc.expect_sym("=")
            value = sc.ident()
            if value is None:
                sc.error("expected attribute value")
            attrs[key] = value
            sc.eat_sym(",")

    def note_state(s: str) -> None:
        if s not in labels:
            order.append(s)
            labels[s] = frozenset()

    while True:
        if sc.eat_sym("}"):
            break
        ident = sc.ident()
        if ident is None:
            sc.error("expected a statement")
        if sc.peek_sym("="):
            sc.expect_sym("=")
            value = sc.ident()
            if value is None:
                sc.error("expected attribute value")
            if ident == "counters":
                declared_counters = _split_list(value, ",")
            sc.eat_sym(";")
            continue
        if sc.eat_sym("->"):
            target = sc.ident()
            if target is None:
                sc.error("expected edge target")
            attrs = read_attrs()
            note_state(ident)
            note_state(target)
            raw_edges.append((ident, target, attrs))
            sc.eat_sym(";")
            continue
        attrs = read_attrs()
        note_state(ident)
        if "props" in attrs:
            labels[ident] = frozenset(_split_list(attrs["props"], ","))
        if attrs.get("init", "").lower() in ("true", "1", "yes"):
            if initial is not None and initial != ident:
                raise ModelError("multiple initial states")
            initial = ident
        sc.eat_sym(";")

    if initial is None:
        raise ModelError("no initial state (mark one node with init=\"true\")")

    transitions: list[Transition] = []
    seen_counters: list[str] = []

    def note_counter(c: str) -> None:
        if c not in seen_counters:
            seen_counters.append(c)

    for tid, (src, dst, attrs) in enumerate(raw_edges):
        update: dict[str, int] = {}
        for item in _split_list(attrs.get("update", ""), ";"):
            m = _UPDATE_RE.match(item)
            if m is None:
                raise ModelError(f"bad update {item!r} on edge {src}->{dst}")
            cname, sign, amount = m.group(1), m.group(2), int(m.group(3))
            update[cname] = update.get(cname, 0) + (amount if sign == "+" else -amount)
            note_counter(cname)
        guards = []
        for item in _split_list(attrs.get("guard", ""), ";"):
            g = parse_constraint(item)
            for a in g.atoms():
                note_counter(a)
            guards.append(g)
        transitions.append(Transition(tid, src, dst,
                                      tuple(sorted(update.items())),
                                      tuple(guards)))

    counters = tuple(declared_counters if declared_counters is not None
                     else seen_counters)
    if declared_counters is not None:
        extra = [c for c in seen_counters if c not in declared_counters]
        if extra:
            raise ModelError(f"undeclared counters used: {extra}")

    system = CounterSystem(tuple(order), initial, labels, counters,
                           tuple(transitions))
    system.validate()
    return system


def print_dot(system: CounterSystem, name: str = "system") -> str:
    lines = [f"digraph {name} {{"]
    if system.counters:
        lines.append('  counters="%s";' % ",".join(system.counters))
    for s in system.states:
        attrs = []
        props = sorted(system.labels.get(s, ()))
        if props:
            attrs.append('props="%s"' % ",".join(props))
        if s == system.initial:
            attrs.append('init="true"')
        suffix = " [%s]" % ", ".join(attrs) if attrs else ""
        lines.append(f"  {s}{suffix};")
    for t in system.transitions:
        attrs = []
        updates = [f"{c}+={k}" if k >= 0 else f"{c}-={-k}"
                   for c, k in t.update if k != 0]
        if updates:
            attrs.append('update="%s"' % ";".join(updates))
        if t.guards:
            attrs.append('guard="%s"' % ";".join(
                print_term(g, g.bound) for g in t.guards))
        suffix = " [%s]" % ", ".join(attrs) if attrs else ""
        lines.append(f"  {t.source} -> {t.target}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def system_to_json(system: CounterSystem) -> str:
    doc = {
        "states": list(system.states),
        "initial": system.initial,
        "labels": {s: sorted(system.labels.get(s, ())) for s in system.states},
        "counters": list(system.counters),
        "transitions": [
            {
                "id": t.tid,
                "source": t.source,
                "target": t.target,
                "update": {c: k for c, k in t.update},
                "guards": [print_term(g, g.bound) for g in t.guards],
            }
            for t in system.transitions
        ],
    }
    return json.dumps(doc, indent=2)
