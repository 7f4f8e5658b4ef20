"""Random counter systems and formulas shared by the differential suites."""

from __future__ import annotations

import random

from flatcheck import CounterSystem, Formula, Term, Transition, desugar
from flatcheck.formula import (And, Atom, CounterGuard, Finally, Globally,
                               Next, Not, Until, TRUE)

PROPS = ["p", "q", "r"]


def random_system(rng: random.Random, max_states: int = 6,
                  max_counters: int = 2, update_range: int = 2,
                  guard_prob: float = 0.2, flat: bool = False) -> CounterSystem:
    n_states = rng.randint(1, max_states)
    states = tuple(f"s{i}" for i in range(n_states))
    n_counters = rng.randint(0, max_counters)
    counters = tuple(f"c{i}" for i in range(n_counters))
    labels = {}
    for s in states:
        labels[s] = frozenset(p for p in PROPS if rng.random() < 0.45)

    edges: list[tuple[str, str]] = []
    if flat:
        # Forward edges over the state order plus at most one self-loop per
        # state keeps every simple loop unique to its start state.
        for i in range(n_states - 1):
            edges.append((states[i], states[rng.randint(i + 1, n_states - 1)]))
            if rng.random() < 0.35 and i + 1 < n_states:
                edges.append((states[i], states[i + 1]))
        for i in range(n_states):
            last = i == n_states - 1
            if last or rng.random() < 0.5:
                edges.append((states[i], states[i]))
    else:
        for i in range(n_states):
            out = rng.randint(1, 2)
            for _ in range(out):
                edges.append((states[i], states[rng.randint(0, n_states - 1)]))

    transitions = []
    for tid, (src, dst) in enumerate(edges):
        update = {}
        for c in counters:
            if rng.random() < 0.6:
                amount = rng.randint(-update_range, update_range)
                if amount:
                    update[c] = amount
        guards = []
        if counters and rng.random() < guard_prob:
            picked = rng.sample(counters, k=min(len(counters),
                                                rng.randint(1, 2)))
            monos = tuple((rng.choice([-2, -1, 1, 2]), c) for c in picked)
            guards.append(Term(monos, rng.randint(-3, 1)))
        transitions.append(Transition(tid, src, dst,
                                      tuple(sorted(update.items())),
                                      tuple(guards)))
    system = CounterSystem(states, states[0], labels, counters,
                           tuple(transitions))
    system.validate()
    return system


def random_term(rng: random.Random, atoms: list[Formula]) -> Term:
    k = rng.randint(1, min(2, len(atoms)))
    picked = rng.sample(atoms, k=k)
    monos = tuple((rng.choice([-2, -1, 1, 2]), a) for a in picked)
    return Term(monos, None)


def random_formula(rng: random.Random, depth: int,
                   counters: tuple[str, ...]) -> Formula:
    """Random sugar-bearing formula biased toward satisfiable shapes."""
    if depth <= 0:
        roll = rng.random()
        if roll < 0.45:
            return Atom(rng.choice(PROPS))
        if roll < 0.6 or not counters:
            return TRUE
        c = rng.choice(counters)
        monos = ((rng.choice([-1, 1]), c),)
        return CounterGuard(Term(monos, None), rng.randint(-3, 3))
    roll = rng.random()
    child = lambda: random_formula(rng, depth - 1, counters)
    if roll < 0.18:
        return Not(child())
    if roll < 0.30:
        return And(child(), child())
    if roll < 0.40:
        return Next(child())
    if roll < 0.55:
        return Finally(child())
    if roll < 0.62:
        return Globally(child())
    left, right = child(), child()
    atoms = [Atom(rng.choice(PROPS)), TRUE, left]
    term = random_term(rng, atoms)
    bound = rng.randint(-2, 4)
    return Until(left, term, bound, right)


def random_core_formula(rng: random.Random, depth: int,
                        counters: tuple[str, ...] = ()) -> Formula:
    return desugar(random_formula(rng, depth, counters))
