"""Encoding of the depth-bounded flat model-checking search into
quantifier-free linear integer arithmetic.

A satisfying assignment describes an augmented path schema of ``n``
positions over the system together with one of its runs: per position a
loop-shape kind, an origin state, a subformula labelling, an iteration
count, selected forward/backward transitions, and counter valuations at the
first, second and last visit.  Consistency constraints tie the labelling to
the run semantics so that any model decodes to a genuine witness.

Loops occupy at least two positions (single-state loops are represented by
longer ones iterated less often) and are traversed at least three times,
the first and last traversal standing in for the label-identical unfoldings
before and after the loop.  The final loop repeats forever, marked by
iteration count 0; counter values there are extended with plus/minus
infinity kinds driven by the per-iteration drift.
"""

from __future__ import annotations

from typing import Optional

from .formula import (And, Atom, CounterGuard, Formula, Next, Not, Term,
                      TrueConst, Until, is_core, subformulae)
from .qpa import (Expr, QpaScript, add, and_, bvar, eq, ge, gt, iff, implies,
                  ite, le, lt, mul, not_, or_, var)
from .system import CounterSystem


class EncodingError(Exception):
    pass


KIND_OUT, KIND_BEGIN, KIND_IN, KIND_END = 0, 1, 2, 3
NEG_INF, FINITE, POS_INF = -1, 0, 1


class EInt:
    """A solver-level integer extended with +/- infinity.

    Encoded as a (kind, payload) variable pair; kind -1/0/+1 stands for
    minus infinity / finite / plus infinity and a big-M scheme is avoided
    because counter values are unbounded.
    """

    def __init__(self, kind: Expr, pay: Expr):
        self.kind = kind
        self.pay = pay

    def is_fin(self, value: Expr) -> Expr:
        return and_(eq(self.kind, FINITE), eq(self.pay, value))

    def is_neg_inf(self) -> Expr:
        return eq(self.kind, NEG_INF)

    def copied_from(self, other: "EInt", delta: Expr = 0) -> Expr:
        """This value equals ``other + delta`` for a finite delta term."""
        return and_(eq(self.kind, other.kind),
                    implies(eq(other.kind, FINITE),
                            eq(self.pay, add(other.pay, delta))))

    def ge_const(self, bound: int) -> Expr:
        return or_(eq(self.kind, POS_INF),
                   and_(eq(self.kind, FINITE), ge(self.pay, bound)))

    def lt_const(self, bound: int) -> Expr:
        return or_(eq(self.kind, NEG_INF),
                   and_(eq(self.kind, FINITE), lt(self.pay, bound)))

    def gt_zero(self) -> Expr:
        return or_(eq(self.kind, POS_INF),
                   and_(eq(self.kind, FINITE), gt(self.pay, 0)))

    def max_of(self, other: "EInt") -> Expr:
        """This value equals max(other, 0)."""
        return ite(other.gt_zero(), self.copied_from(other), self.is_fin(0))


class _Encoding:
    def __init__(self, system: CounterSystem, phi: Formula, n: int):
        if n < 2:
            raise EncodingError("depth must be at least 2 (the final loop "
                                "needs two positions)")
        if not is_core(phi):
            raise EncodingError("formula must be desugared first")
        system.validate()
        for f in subformulae(phi):
            if isinstance(f, CounterGuard):
                for a in f.term.atoms():
                    if a not in system.counters:
                        raise EncodingError(
                            f"formula guard uses undeclared counter {a!r}")
        self.system = system
        self.phi = phi
        self.n = n
        self.closure = subformulae(phi)
        self.index = {f: j for j, f in enumerate(self.closure)}
        self.state_idx = {s: k for k, s in enumerate(system.states)}
        self.script = QpaScript()
        self.script.meta = {
            "depth": n,
            "states": list(system.states),
            "counters": list(system.counters),
            "closure": [str(f) for f in self.closure],
            "transitions": len(system.transitions),
        }

    # -- variable handles ---------------------------------------------------

    def kind(self, i: int) -> Expr:
        return var(f"kind{i}")

    def orig(self, i: int) -> Expr:
        return var(f"orig{i}")

    def oend(self, i: int) -> Expr:
        return var(f"oend{i}")

    def iters(self, i: int) -> Expr:
        return var(f"iters{i}")

    def efwd(self, i: int) -> Expr:
        return var(f"efwd{i}")

    def ebwd(self, i: int) -> Expr:
        return var(f"ebwd{i}")

    def v1(self, c: str, i: int) -> Expr:
        return var(f"v1_{c}_{i}")

    def v2(self, c: str, i: int) -> Expr:
        return var(f"v2_{c}_{i}")

    def vlast(self, c: str, i: int) -> EInt:
        return EInt(var(f"vlk_{c}_{i}"), var(f"vl_{c}_{i}"))

    def v1end(self, c: str, i: int) -> Expr:
        return var(f"v1e_{c}_{i}")

    def lupd(self, c: str, i: int) -> Expr:
        return var(f"lu_{c}_{i}")

    def lbl(self, f: Formula, i: int) -> Expr:
        return bvar(f"lbl{self.index[f]}_{i}")

    def atbeg(self, f: Formula, i: int) -> Expr:
        return bvar(f"atb{self.index[f]}_{i}")

    def _u(self, u: Until, stem: str, i: Optional[int] = None) -> str:
        j = self.index[u]
        return f"{stem}{j}" if i is None else f"{stem}{j}_{i}"

    def tail_eff(self, u: Until, i: int) -> Expr:
        return var(self._u(u, "tl", i))

    def sfx(self, u: Until, i: int) -> Expr:
        return bvar(self._u(u, "sx", i))

    def reach(self, u: Until, i: int) -> Expr:
        return bvar(self._u(u, "rc", i))

    def fin_tail(self, u: Until) -> Expr:
        return bvar(self._u(u, "fin"))

    def wit(self, u: Until, track: str, i: int) -> EInt:
        return EInt(var(self._u(u, f"w{track}k", i)),
                    var(self._u(u, f"w{track}", i)))

    def upd(self, u: Until, track: str, i: int) -> EInt:
        return EInt(var(self._u(u, f"u{track}k", i)),
                    var(self._u(u, f"u{track}", i)))

    def sum_eff(self, u: Until, i: int) -> Expr:
        return var(self._u(u, "se", i))

    def eff(self, u: Until, k: int, i: int) -> Expr:
        j = self.index[u]
        return var(f"eff{j}_{k}_{i}")

    # -- term helpers -------------------------------------------------------

    def term_v1(self, term: Term, i: int) -> Expr:
        return add(*[mul(c, self.v1(a, i)) for c, a in term.monomials])

    def term_v2(self, term: Term, i: int) -> Expr:
        return add(*[mul(c, self.v2(a, i)) for c, a in term.monomials])

    def term_vlast_pay(self, term: Term, i: int) -> Expr:
        return add(*[mul(c, var(f"vl_{a}_{i}")) for c, a in term.monomials])

    def term_drift(self, term: Term, i: int) -> Expr:
        """Per-iteration change of the term's value along position i's loop."""
        parts = []
        for c, a in term.monomials:
            parts.append(mul(c, self.v2(a, i)))
            parts.append(mul(-c, self.v1(a, i)))
        return add(*parts)

    def term_last_ge(self, term: Term, bound: int, i: int) -> Expr:
        """``term >= bound`` at the last visit of position i.

        On the forever-repeated final loop the value at visit k is affine in
        k, so the limit verdict is decided by the sign of the per-iteration
        drift; elsewhere the stored last-visit payload is used directly.
        """
        drift = self.term_drift(term, i)
        limit = or_(gt(drift, 0),
                    and_(eq(drift, 0), ge(self.term_v1(term, i), bound)))
        return ite(eq(self.iters(i), 0), limit,
                   ge(self.term_vlast_pay(term, i), bound))

    def term_last_lt(self, term: Term, bound: int, i: int) -> Expr:
        drift = self.term_drift(term, i)
        limit = or_(lt(drift, 0),
                    and_(eq(drift, 0), lt(self.term_v1(term, i), bound)))
        return ite(eq(self.iters(i), 0), limit,
                   lt(self.term_vlast_pay(term, i), bound))

    def term_lbl(self, term: Term, i: int) -> Expr:
        """Term value over the 0/1 labelling of position i."""
        parts = []
        for c, a in term.monomials:
            assert isinstance(a, Formula)
            parts.append(ite(self.lbl(a, i), c, 0))
        return add(*parts)

    # -- declarations -------------------------------------------------------

    def declare_all(self) -> None:
        sc = self.script
        n = self.n
        x_args = []
        seen_args = set()
        for f in self.closure:
            if isinstance(f, Next) and f.child not in seen_args:
                seen_args.add(f.child)
                x_args.append(f.child)
        self.x_args = x_args
        untils = [f for f in self.closure if isinstance(f, Until)]
        self.untils = untils

        for i in range(n):
            sc.declare(f"kind{i}", "int")
            sc.declare(f"orig{i}", "int")
            sc.declare(f"oend{i}", "int")
            sc.declare(f"iters{i}", "int")
            if i >= 1:
                sc.declare(f"efwd{i}", "int")
            sc.declare(f"ebwd{i}", "int")
            for c in self.system.counters:
                sc.declare(f"v1_{c}_{i}", "int")
                sc.declare(f"v2_{c}_{i}", "int")
                sc.declare(f"vl_{c}_{i}", "int")
                sc.declare(f"vlk_{c}_{i}", "int")
                sc.declare(f"v1e_{c}_{i}", "int")
                sc.declare(f"lu_{c}_{i}", "int")
            for j, f in enumerate(self.closure):
                sc.declare(f"lbl{j}_{i}", "bool")
            for f in x_args:
                sc.declare(f"atb{self.index[f]}_{i}", "bool")
            for u in untils:
                j = self.index[u]
                sc.declare(f"tl{j}_{i}", "int")
                sc.declare(f"sx{j}_{i}", "bool")
                sc.declare(f"rc{j}_{i}", "bool")
                for track in ("f", "l", "a"):
                    sc.declare(f"w{track}{j}_{i}", "int")
                    sc.declare(f"w{track}k{j}_{i}", "int")
                    sc.declare(f"u{track}{j}_{i}", "int")
                    sc.declare(f"u{track}k{j}_{i}", "int")
                sc.declare(f"wab{j}_{i}", "int")
                sc.declare(f"wabk{j}_{i}", "int")
                sc.declare(f"se{j}_{i}", "int")
                assert u.term is not None
                for k in range(len(u.term.monomials)):
                    sc.declare(f"eff{j}_{k}_{i}", "int")
        for u in untils:
            sc.declare(self._u(u, "fin"), "bool")

    # -- schema shape -------------------------------------------------------

    def emit_shape(self) -> None:
        sc, n = self.script, self.n
        for i in range(n):
            sc.assert_("shape", and_(ge(self.kind(i), 0), le(self.kind(i), 3)))
        sc.assert_("shape", le(self.kind(0), KIND_BEGIN))
        sc.assert_("shape", eq(self.kind(n - 1), KIND_END))
        for i in range(1, n):
            prev_closed = or_(eq(self.kind(i - 1), KIND_END),
                              eq(self.kind(i - 1), KIND_OUT))
            sc.assert_("shape", ite(
                prev_closed,
                or_(eq(self.kind(i), KIND_OUT), eq(self.kind(i), KIND_BEGIN)),
                or_(eq(self.kind(i), KIND_IN), eq(self.kind(i), KIND_END))))
        top = len(self.system.states) - 1
        for i in range(n):
            sc.assert_("shape", and_(ge(self.orig(i), 0), le(self.orig(i), top)))
        sc.assert_("shape", eq(self.orig(0), self.state_idx[self.system.initial]))

    def emit_labels(self) -> None:
        sc, n = self.script, self.n
        for f in self.closure:
            if isinstance(f, TrueConst):
                for i in range(n):
                    sc.assert_("labels", self.lbl(f, i))
            elif isinstance(f, Atom):
                carriers = [self.state_idx[s] for s in self.system.states
                            if f.name in self.system.labels.get(s, frozenset())]
                for i in range(n):
                    sc.assert_("labels", iff(
                        self.lbl(f, i),
                        or_(*[eq(self.orig(i), k) for k in carriers])))

    def emit_origin_propagation(self) -> None:
        sc, n = self.script, self.n
        sc.assert_("origin-propagation", eq(self.oend(n - 1), self.orig(n - 1)))
        for i in range(n - 1):
            sc.assert_("origin-propagation", ite(
                eq(self.kind(i), KIND_END),
                eq(self.oend(i), self.orig(i)),
                eq(self.oend(i), self.oend(i + 1))))

    def emit_transitions(self) -> None:
        sc, n = self.script, self.n
        trans = self.system.transitions
        last = len(trans) - 1
        for i in range(1, n):
            sc.assert_("transitions", and_(ge(self.efwd(i), 0),
                                           le(self.efwd(i), last)))
            for t in trans:
                sc.assert_("transitions", implies(
                    eq(self.efwd(i), t.tid),
                    and_(eq(self.orig(i - 1), self.state_idx[t.source]),
                         eq(self.orig(i), self.state_idx[t.target]))))
        for i in range(n):
            sc.assert_("transitions", ite(
                eq(self.kind(i), KIND_BEGIN),
                and_(ge(self.ebwd(i), 0), le(self.ebwd(i), last)),
                eq(self.ebwd(i), -1)))
            for t in trans:
                sc.assert_("transitions", implies(
                    eq(self.ebwd(i), t.tid),
                    and_(eq(self.oend(i), self.state_idx[t.source]),
                         eq(self.orig(i), self.state_idx[t.target]))))

    # -- run ----------------------------------------------------------------

    def emit_iteration_counts(self) -> None:
        sc, n = self.script, self.n
        sc.assert_("iteration-counts", eq(self.iters(n - 1), 0))
        for i in range(n - 1):
            sc.assert_("iteration-counts", ge(self.iters(i), 0))
            sc.assert_("iteration-counts", implies(
                eq(self.kind(i), KIND_OUT), eq(self.iters(i), 1)))
            sc.assert_("iteration-counts", implies(
                or_(eq(self.kind(i), KIND_BEGIN), eq(self.kind(i), KIND_IN)),
                eq(self.iters(i), self.iters(i + 1))))
            # A loop closing before the last position is iterated at least
            # three times: front row, one real pass, rear row.
            sc.assert_("iteration-counts", implies(
                eq(self.kind(i), KIND_END), ge(self.iters(i), 3)))

    def emit_valuations(self) -> None:
        sc, n = self.script, self.n
        counters = self.system.counters
        trans = self.system.transitions
        for c in counters:
            sc.assert_("valuations", eq(self.v1(c, 0), 0))
        for i in range(n):
            row_pin = and_(*[and_(eq(self.v2(c, i), self.v1(c, i)),
                                  self.vlast(c, i).is_fin(self.v1(c, i)))
                             for c in counters])
            sc.assert_("valuations", implies(eq(self.kind(i), KIND_OUT),
                                             row_pin))
        for i in range(1, n):
            for t in trans:
                sel = eq(self.efwd(i), t.tid)
                # Entering a row or opening a loop continues from the
                # previous position's last visit, which must be finite.
                from_last = and_(*[
                    and_(eq(var(f"vlk_{c}_{i - 1}"), FINITE),
                         eq(self.v1(c, i),
                            add(var(f"vl_{c}_{i - 1}"), t.update_of(c))))
                    for c in counters])
                sc.assert_("valuations", implies(
                    and_(or_(eq(self.kind(i), KIND_OUT),
                             eq(self.kind(i), KIND_BEGIN)), sel),
                    from_last))
                inside = and_(*[
                    and_(eq(self.v1(c, i),
                            add(self.v1(c, i - 1), t.update_of(c))),
                         eq(self.v2(c, i),
                            add(self.v2(c, i - 1), t.update_of(c))),
                         self.vlast(c, i).copied_from(self.vlast(c, i - 1),
                                                      t.update_of(c)))
                    for c in counters])
                sc.assert_("valuations", implies(
                    and_(or_(eq(self.kind(i), KIND_IN),
                             eq(self.kind(i), KIND_END)), sel),
                    inside))
        # First-visit value at the loop's final position, made available at
        # its beginning for the second-visit computation.
        for c in counters:
            sc.assert_("valuations", eq(self.v1end(c, n - 1), self.v1(c, n - 1)))
            for i in range(n - 1):
                sc.assert_("valuations", ite(
                    eq(self.kind(i), KIND_END),
                    eq(self.v1end(c, i), self.v1(c, i)),
                    eq(self.v1end(c, i), self.v1end(c, i + 1))))
        for i in range(n):
            for t in trans:
                sc.assert_("valuations", implies(
                    eq(self.ebwd(i), t.tid),
                    and_(*[eq(self.v2(c, i),
                              add(self.v1end(c, i), t.update_of(c)))
                           for c in counters])))
        self._emit_loop_update()
        self._emit_last_visit()

    def _emit_loop_update(self) -> None:
        sc, n = self.script, self.n
        counters = self.system.counters
        trans = self.system.transitions
        for c in counters:
            sc.assert_("valuations", eq(self.lupd(c, n - 1), 0))
        for i in range(n - 1):
            for c in counters:
                sc.assert_("valuations", implies(
                    eq(self.kind(i), KIND_OUT), eq(self.lupd(c, i), 0)))
            for t in trans:
                fsel = eq(self.efwd(i), t.tid) if i >= 1 else False
                if i >= 1:
                    # Across the loop body the per-counter update is scaled
                    # by the iteration count minus the explicit first pass.
                    sc.assert_("valuations", implies(
                        and_(eq(self.kind(i), KIND_END), fsel),
                        and_(*[eq(self.lupd(c, i),
                                  add(mul(t.update_of(c), self.iters(i)),
                                      -t.update_of(c)))
                               for c in counters])))
                    sc.assert_("valuations", implies(
                        and_(eq(self.kind(i), KIND_IN), fsel),
                        and_(*[eq(self.lupd(c, i),
                                  add(mul(t.update_of(c), self.iters(i)),
                                      -t.update_of(c), self.lupd(c, i + 1)))
                               for c in counters])))
                sc.assert_("valuations", implies(
                    and_(eq(self.kind(i), KIND_BEGIN),
                         eq(self.ebwd(i), t.tid)),
                    and_(*[eq(self.lupd(c, i),
                              add(mul(t.update_of(c), self.iters(i)),
                                  -t.update_of(c), self.lupd(c, i + 1)))
                           for c in counters])))

    def _emit_last_visit(self) -> None:
        sc, n = self.script, self.n
        for i in range(n):
            for c in self.system.counters:
                vlast = self.vlast(c, i)
                finite_case = and_(eq(var(f"vlk_{c}_{i}"), FINITE),
                                   eq(var(f"vl_{c}_{i}"),
                                      add(self.v1(c, i), self.lupd(c, i))))
                # Forever loop: the limit per counter follows the sign of its
                # drift between the first and second visit.
                limit_case = or_(
                    and_(eq(self.v1(c, i), self.v2(c, i)),
                         vlast.is_fin(self.v1(c, i))),
                    and_(gt(self.v1(c, i), self.v2(c, i)),
                         eq(var(f"vlk_{c}_{i}"), NEG_INF)),
                    and_(lt(self.v1(c, i), self.v2(c, i)),
                         eq(var(f"vlk_{c}_{i}"), POS_INF)))
                sc.assert_("valuations", implies(
                    eq(self.kind(i), KIND_BEGIN),
                    ite(gt(self.iters(i), 0), finite_case, limit_case)))

    def emit_guards(self) -> None:
        sc, n = self.script, self.n
        for i in range(1, n):
            for t in self.system.transitions:
                for g in t.guards:
                    assert g.bound is not None
                    sc.assert_("guards-forward", implies(
                        eq(self.efwd(i), t.tid),
                        and_(ge(self.term_v1(g, i), g.bound),
                             implies(not_(eq(self.kind(i), KIND_BEGIN)),
                                     self.term_last_ge(g, g.bound, i)))))
        for i in range(n):
            for t in self.system.transitions:
                for g in t.guards:
                    sc.assert_("guards-backward", implies(
                        eq(self.ebwd(i), t.tid),
                        and_(ge(self.term_v2(g, i), g.bound),
                             self.term_last_ge(g, g.bound, i))))

    # -- consistency ---------------------------------------------------------

    def emit_consistency(self) -> None:
        for f in self.closure:
            if isinstance(f, Not):
                self._consistency_not(f)
            elif isinstance(f, And):
                self._consistency_and(f)
            elif isinstance(f, CounterGuard):
                self._consistency_guard(f)
            elif isinstance(f, Next):
                self._consistency_next(f)
            elif isinstance(f, Until):
                self._consistency_until(f)

    def _consistency_not(self, f: Not) -> None:
        for i in range(self.n):
            self.script.assert_("consistency-not", iff(
                self.lbl(f, i), not_(self.lbl(f.child, i))))

    def _consistency_and(self, f: And) -> None:
        for i in range(self.n):
            self.script.assert_("consistency-and", iff(
                self.lbl(f, i),
                and_(self.lbl(f.left, i), self.lbl(f.right, i))))

    def _consistency_guard(self, f: CounterGuard) -> None:
        # Labelled positions satisfy the constraint at every visit, covered
        # by first plus last; unlabelled positions satisfy the dual at every
        # visit (the plain negation would admit labels flipping mid-loop).
        for i in range(self.n):
            holds = and_(ge(self.term_v1(f.term, i), f.bound),
                         self.term_last_ge(f.term, f.bound, i))
            fails = and_(lt(self.term_v1(f.term, i), f.bound),
                         self.term_last_lt(f.term, f.bound, i))
            self.script.assert_("consistency-guard", ite(
                self.lbl(f, i), holds, fails))

    def _consistency_next(self, f: Next) -> None:
        sc, n = self.script, self.n
        arg = f.child
        sc.assert_("consistency-next", iff(
            self.atbeg(arg, 0), self.lbl(arg, 0)))
        for i in range(1, n):
            sc.assert_("consistency-next", ite(
                eq(self.kind(i), KIND_BEGIN),
                iff(self.atbeg(arg, i), self.lbl(arg, i)),
                iff(self.atbeg(arg, i), self.atbeg(arg, i - 1))))
        sc.assert_("consistency-next", iff(
            self.lbl(f, n - 1), self.atbeg(arg, n - 1)))
        for i in range(n - 1):
            sc.assert_("consistency-next", ite(
                self.lbl(f, i),
                and_(self.lbl(arg, i + 1),
                     implies(eq(self.kind(i), KIND_END), self.atbeg(arg, i))),
                and_(not_(self.lbl(arg, i + 1)),
                     implies(eq(self.kind(i), KIND_END),
                             not_(self.atbeg(arg, i))))))

    def _consistency_until(self, u: Until) -> None:
        sc, n = self.script, self.n
        assert u.term is not None
        chi, psi, term, bound = u.left, u.right, u.term, u.bound
        group = "consistency-until"

        # Suffix / reachability closure of the left argument.
        sc.assert_(group, iff(self.sfx(u, n - 1), self.lbl(chi, n - 1)))
        for i in range(n - 1):
            sc.assert_(group, iff(
                self.sfx(u, i), and_(self.sfx(u, i + 1), self.lbl(chi, i))))
        sc.assert_(group, iff(self.reach(u, 0), self.sfx(u, 0)))
        for i in range(1, n):
            sc.assert_(group, iff(
                self.reach(u, i),
                ite(or_(eq(self.kind(i), KIND_OUT),
                        eq(self.kind(i), KIND_BEGIN)),
                    self.sfx(u, i), self.reach(u, i - 1))))

        # Term effect of one pass around the forever loop.
        sc.assert_(group, eq(self.tail_eff(u, n - 1), self.term_lbl(term, n - 1)))
        for i in range(n - 1):
            sc.assert_(group, ite(
                eq(self.iters(i), 0),
                eq(self.tail_eff(u, i),
                   add(self.tail_eff(u, i + 1), self.term_lbl(term, i))),
                eq(self.tail_eff(u, i), self.tail_eff(u, i + 1))))

        # Right argument occurring on the forever loop.
        sc.assert_(group, iff(
            self.fin_tail(u),
            or_(*[and_(eq(self.iters(i), 0), self.lbl(psi, i))
                  for i in range(n)])))

        self._until_loop_effect(u)
        self._until_propagation(u)
        self._until_selection(u)

        # Per position: either the forever loop keeps growing the term with
        # the chain alive (and the position is labelled), or the best
        # reachable witness value decides the label at both the first and
        # last visit.
        for i in range(n):
            escape = and_(gt(self.tail_eff(u, 0), 0), self.fin_tail(u),
                          self.reach(u, i))
            on_forever = eq(self.iters(i), 0)
            pos = or_(escape,
                      and_(self.wit(u, "f", i).ge_const(bound),
                           or_(self.wit(u, "l", i).ge_const(bound),
                               on_forever)))
            neg = and_(self.wit(u, "f", i).lt_const(bound),
                       or_(self.wit(u, "l", i).lt_const(bound), on_forever),
                       not_(escape))
            sc.assert_(group, ite(self.lbl(u, i), pos, neg))

    def _until_loop_effect(self, u: Until) -> None:
        sc, n = self.script, self.n
        assert u.term is not None
        monos = u.term.monomials
        group = "consistency-until"
        for i in range(n):
            for k, (a, f) in enumerate(monos):
                assert isinstance(f, Formula)
                # Contribution of this monomial over the loop passes not
                # explicitly represented (all but front, one pass, rear).
                scaled = add(mul(a, self.iters(i)), -3 * a)
                if k == 0:
                    sc.assert_(group, ite(
                        self.lbl(f, i),
                        eq(self.eff(u, 0, i), scaled),
                        eq(self.eff(u, 0, i), 0)))
                else:
                    sc.assert_(group, ite(
                        self.lbl(f, i),
                        eq(self.eff(u, k, i),
                           add(self.eff(u, k - 1, i), scaled)),
                        eq(self.eff(u, k, i), self.eff(u, k - 1, i))))
        last = len(monos) - 1
        sc.assert_(group, eq(self.sum_eff(u, 0), self.eff(u, last, 0)))
        for i in range(1, n):
            sc.assert_(group, ite(
                eq(self.kind(i), KIND_BEGIN),
                eq(self.sum_eff(u, i), self.eff(u, last, i)),
                ite(or_(eq(self.kind(i), KIND_IN),
                        eq(self.kind(i), KIND_END)),
                    eq(self.sum_eff(u, i),
                       add(self.sum_eff(u, i - 1), self.eff(u, last, i))),
                    eq(self.sum_eff(u, i), self.eff(u, last, i)))))

    def _until_propagation(self, u: Until) -> None:
        sc, n = self.script, self.n
        assert u.term is not None
        group = "consistency-until"
        psi = u.right

        # Auxiliary-track value at a loop's beginning, made available
        # throughout the loop for the first-visit computation at its end.
        wab0 = EInt(var(self._u(u, "wabk", 0)), var(self._u(u, "wab", 0)))
        sc.assert_(group, wab0.copied_from(self.wit(u, "a", 0)))
        for i in range(1, n):
            here = EInt(var(self._u(u, "wabk", i)), var(self._u(u, "wab", i)))
            prev = EInt(var(self._u(u, "wabk", i - 1)),
                        var(self._u(u, "wab", i - 1)))
            sc.assert_(group, ite(
                eq(self.kind(i), KIND_BEGIN),
                here.copied_from(self.wit(u, "a", i)),
                here.copied_from(prev)))

        for i in range(n - 1):
            tlbl = self.term_lbl(u.term, i)
            uf, ul, ua = (self.upd(u, "f", i), self.upd(u, "l", i),
                          self.upd(u, "a", i))
            wab_i = EInt(var(self._u(u, "wabk", i)), var(self._u(u, "wab", i)))
            sc.assert_(group, implies(
                eq(self.kind(i), KIND_OUT),
                and_(uf.copied_from(self.wit(u, "f", i + 1), tlbl),
                     ul.copied_from(self.wit(u, "f", i + 1), tlbl),
                     ua.copied_from(self.wit(u, "f", i + 1), tlbl))))
            sc.assert_(group, implies(
                eq(self.kind(i), KIND_END),
                and_(ul.copied_from(self.wit(u, "f", i + 1), tlbl),
                     uf.copied_from(wab_i, tlbl),
                     ua.copied_from(self.wit(u, "l", i), self.sum_eff(u, i)))))
            sc.assert_(group, implies(
                or_(eq(self.kind(i), KIND_BEGIN), eq(self.kind(i), KIND_IN)),
                and_(ul.copied_from(self.wit(u, "l", i + 1), tlbl),
                     uf.copied_from(self.wit(u, "f", i + 1), tlbl),
                     ua.copied_from(self.wit(u, "a", i + 1), tlbl))))

        last = n - 1
        ua_last = self.upd(u, "a", last)
        sc.assert_(group, ite(self.lbl(psi, last),
                              ua_last.is_fin(0), ua_last.is_neg_inf()))
        tlbl_last = self.term_lbl(u.term, last)
        wab_last = EInt(var(self._u(u, "wabk", last)),
                        var(self._u(u, "wab", last)))
        sc.assert_(group, self.upd(u, "f", last).copied_from(wab_last,
                                                             tlbl_last))
        sc.assert_(group, self.upd(u, "l", last).copied_from(wab_last,
                                                             tlbl_last))

    def _until_selection(self, u: Until) -> None:
        sc, n = self.script, self.n
        group = "consistency-until"
        chi, psi = u.left, u.right
        for i in range(n):
            wf, wl, wa = (self.wit(u, "f", i), self.wit(u, "l", i),
                          self.wit(u, "a", i))
            uf, ul, ua = (self.upd(u, "f", i), self.upd(u, "l", i),
                          self.upd(u, "a", i))
            c, p = self.lbl(chi, i), self.lbl(psi, i)
            sc.assert_(group, implies(
                and_(not_(c), not_(p)),
                and_(wf.is_neg_inf(), wa.is_neg_inf(), wl.is_neg_inf())))
            sc.assert_(group, implies(
                and_(not_(c), p),
                and_(wf.is_fin(0), wa.is_fin(0), wl.is_fin(0))))
            sc.assert_(group, implies(
                and_(c, not_(p)),
                and_(wf.copied_from(uf), wa.copied_from(ua),
                     wl.copied_from(ul))))
            sc.assert_(group, implies(
                and_(c, p),
                and_(wf.max_of(uf), wa.max_of(ua), wl.max_of(ul))))
            for track in ("f", "l", "a"):
                kind_var = var(self._u(u, f"w{track}k", i))
                sc.assert_(group, and_(ge(kind_var, -1), le(kind_var, 1)))
                ukind = var(self._u(u, f"u{track}k", i))
                sc.assert_(group, and_(ge(ukind, -1), le(ukind, 1)))
            wabk = var(self._u(u, "wabk", i))
            sc.assert_(group, and_(ge(wabk, -1), le(wabk, 1)))

    # -- top ------------------------------------------------------------------

    def build(self) -> QpaScript:
        self.declare_all()
        self.emit_shape()
        self.emit_labels()
        self.emit_origin_propagation()
        self.emit_transitions()
        self.emit_iteration_counts()
        self.emit_valuations()
        self.emit_guards()
        self.emit_consistency()
        self.script.assert_("target", self.lbl(self.phi, 0))
        return self.script


def encode_fmc(system: CounterSystem, phi: Formula, n: int) -> QpaScript:
    """Build the satisfiability query for a depth-``n`` flat approximation.

    The script is satisfiable exactly when some run representable by an
    ``n``-position schema satisfies the formula, and every model decodes to
    a checkable witness.
    """
    return _Encoding(system, phi, n).build()


def _family_slice(system: CounterSystem, phi: Formula, n: int,
                  groups: tuple[str, ...]) -> QpaScript:
    full = _Encoding(system, phi, n).build()
    out = QpaScript()
    out.declarations = list(full.declarations)
    out.assertions = [(g, e) for g, e in full.assertions if g in groups]
    out.meta = dict(full.meta)
    return out


APS_GROUPS = ("shape", "labels", "origin-propagation", "transitions")
RUN_GROUPS = ("iteration-counts", "valuations", "guards-forward",
              "guards-backward")
CONSISTENCY_GROUPS = ("labels", "consistency-not", "consistency-and",
                      "consistency-guard", "consistency-next",
                      "consistency-until")


def encode_aps(system: CounterSystem, phi: Formula, n: int) -> QpaScript:
    """Schema-structure constraints only (shape, origins, transitions)."""
    return _family_slice(system, phi, n, APS_GROUPS)


def encode_run(system: CounterSystem, phi: Formula, n: int) -> QpaScript:
    """Run constraints only (iteration counts, valuations, guards)."""
    return _family_slice(system, phi, n, RUN_GROUPS)


def encode_consistency(system: CounterSystem, phi: Formula,
                       n: int) -> QpaScript:
    """Labelling-consistency constraints for every closure member."""
    return _family_slice(system, phi, n, CONSISTENCY_GROUPS)


def encode_until(system: CounterSystem, phi: Formula, n: int,
                 until: Until) -> QpaScript:
    """Consistency constraints belonging to one until subformula."""
    enc = _Encoding(system, phi, n)
    enc.declare_all()
    enc._consistency_until(until)
    script = enc.script
    return script
