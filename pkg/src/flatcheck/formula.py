"""Counting-LTL formulas: AST, concrete syntax, desugaring and term arithmetic.

The core language has six node kinds: ``true``, atomic propositions,
linear constraints over system counters, conjunction, negation, next, and
the counting until ``a U[t >= b] c`` whose subscript term counts how often
the term's atoms hold between now and the witness position.  Everything
else (``false``, ``|``, ``->``, ``F``, ``G``, plain ``U``, frequency
``U{a/b}``) is sugar removed by :func:`desugar`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union


class CLTLError(Exception):
    """Base class for formula-level errors."""


class ParseError(CLTLError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


class MissingCountError(CLTLError):
    """A term was evaluated against counts lacking one of its atoms."""

    def __init__(self, atom):
        super().__init__(f"no count for term atom {atom!r}")
        self.atom = atom


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

class Formula:
    """Base class; all nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self) -> str:
        return print_formula(self)


TermAtom = Union[Formula, str]  # str = counter name (guards only)


@dataclass(frozen=True)
class Term:
    """Linear expression ``sum(coef * atom)``, optionally paired with a bound.

    With a bound it denotes the constraint ``term >= bound``.
    """

    monomials: tuple[tuple[int, TermAtom], ...]
    bound: Optional[int] = None

    def atoms(self) -> tuple[TermAtom, ...]:
        return tuple(a for _, a in self.monomials)

    def negate(self) -> "Term":
        return Term(tuple((-c, a) for c, a in self.monomials), None)

    def normalize(self) -> "Term":
        """Merge duplicate atoms; keeps first-occurrence order, drops zeros."""
        order: list[TermAtom] = []
        coefs: dict[TermAtom, int] = {}
        for c, a in self.monomials:
            if a not in coefs:
                coefs[a] = 0
                order.append(a)
            coefs[a] += c
        monos = tuple((coefs[a], a) for a in order if coefs[a] != 0)
        return Term(monos, self.bound)


@dataclass(frozen=True)
class TrueConst(Formula):
    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    name: str


@dataclass(frozen=True)
class CounterGuard(Formula):
    """Atomic constraint ``term >= bound`` over system counter names."""

    term: Term
    bound: int


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    child: Formula


@dataclass(frozen=True)
class Until(Formula):
    """``left U[term >= bound] right``; ``term is None`` means plain until."""

    left: Formula
    term: Optional[Term]
    bound: int
    right: Formula


# Sugar nodes, removed by desugar().

@dataclass(frozen=True)
class FalseConst(Formula):
    __slots__ = ()


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Finally(Formula):
    """``F child`` or ``F[term >= bound] child``."""

    child: Formula
    term: Optional[Term] = None
    bound: int = 0


@dataclass(frozen=True)
class Globally(Formula):
    child: Formula


@dataclass(frozen=True)
class FreqUntil(Formula):
    """Frequency until ``left U{num/den} right``."""

    left: Formula
    num: int
    den: int
    right: Formula


TRUE = TrueConst()

CORE_KINDS = (TrueConst, Atom, CounterGuard, Not, And, Next, Until)


def is_core(f: Formula) -> bool:
    if isinstance(f, Until):
        return f.term is not None and all(
            isinstance(a, Formula) and is_core(a) for a in f.term.atoms()
        ) and is_core(f.left) and is_core(f.right)
    if isinstance(f, (TrueConst, Atom, CounterGuard)):
        return True
    if isinstance(f, Not):
        return is_core(f.child)
    if isinstance(f, And):
        return is_core(f.left) and is_core(f.right)
    if isinstance(f, Next):
        return is_core(f.child)
    return False


# ---------------------------------------------------------------------------
# Desugaring
# ---------------------------------------------------------------------------

def _plain_term() -> Term:
    return Term(((1, TRUE),), None)


def desugar(f: Formula) -> Formula:
    """Rewrite to the six core node kinds.  Total and idempotent."""
    if isinstance(f, TrueConst):
        return f
    if isinstance(f, FalseConst):
        return Not(TRUE)
    if isinstance(f, Atom):
        return f
    if isinstance(f, CounterGuard):
        return f
    if isinstance(f, Not):
        return Not(desugar(f.child))
    if isinstance(f, And):
        return And(desugar(f.left), desugar(f.right))
    if isinstance(f, Or):
        return Not(And(Not(desugar(f.left)), Not(desugar(f.right))))
    if isinstance(f, Implies):
        return Not(And(desugar(f.left), Not(desugar(f.right))))
    if isinstance(f, Next):
        return Next(desugar(f.child))
    if isinstance(f, Finally):
        term = _desugar_term(f.term) if f.term is not None else _plain_term()
        bound = f.bound if f.term is not None else 0
        return Until(TRUE, term, bound, desugar(f.child))
    if isinstance(f, Globally):
        # G a == !F!a
        return Not(Until(TRUE, _plain_term(), 0, Not(desugar(f.child))))
    if isinstance(f, FreqUntil):
        # a U{p/q} b == true U[q*a - p*true >= 0] b
        left = desugar(f.left)
        term = Term(((f.den, left), (-f.num, TRUE)), None)
        return Until(TRUE, term, 0, desugar(f.right))
    if isinstance(f, Until):
        if f.term is None:
            return Until(desugar(f.left), _plain_term(), 0, desugar(f.right))
        return Until(desugar(f.left), _desugar_term(f.term), f.bound, desugar(f.right))
    raise CLTLError(f"unknown formula node {f!r}")


def _desugar_term(t: Term) -> Term:
    monos = []
    for c, a in t.monomials:
        monos.append((c, desugar(a) if isinstance(a, Formula) else a))
    return Term(tuple(monos), t.bound)


# ---------------------------------------------------------------------------
# Closure
# ---------------------------------------------------------------------------

def subformulae(f: Formula) -> list[Formula]:
    """All subformulae of a core formula, children strictly before parents.

    Atoms of until subscript terms count as subformulae.
    """
    seen: set[Formula] = set()
    out: list[Formula] = []

    def visit(g: Formula) -> None:
        if g in seen:
            return
        if isinstance(g, Not):
            visit(g.child)
        elif isinstance(g, And):
            visit(g.left)
            visit(g.right)
        elif isinstance(g, Next):
            visit(g.child)
        elif isinstance(g, Until):
            visit(g.left)
            visit(g.right)
            assert g.term is not None, "subformulae requires desugared input"
            for a in g.term.atoms():
                assert isinstance(a, Formula)
                visit(a)
        seen.add(g)
        out.append(g)

    visit(f)
    return out


def counter_names(f: Formula) -> set[str]:
    """Counter names referenced by guard atoms anywhere in the formula."""
    names: set[str] = set()

    def visit(g: Formula) -> None:
        if isinstance(g, CounterGuard):
            names.update(a for a in g.term.atoms() if isinstance(a, str))
        elif isinstance(g, Not):
            visit(g.child)
        elif isinstance(g, (And, Or, Implies)):
            visit(g.left)
            visit(g.right)
        elif isinstance(g, (Next, Globally)):
            visit(g.child)
        elif isinstance(g, Finally):
            visit(g.child)
            if g.term is not None:
                for a in g.term.atoms():
                    if isinstance(a, Formula):
                        visit(a)
        elif isinstance(g, (Until, FreqUntil)):
            visit(g.left)
            visit(g.right)
            if isinstance(g, Until) and g.term is not None:
                for a in g.term.atoms():
                    if isinstance(a, Formula):
                        visit(a)

    visit(f)
    return names


# ---------------------------------------------------------------------------
# Term arithmetic
# ---------------------------------------------------------------------------

def term_eval(t: Term, counts: dict) -> int:
    """Exact value of ``sum(coef * counts[atom])``; missing atoms are an error."""
    total = 0
    for c, a in t.monomials:
        if a not in counts:
            raise MissingCountError(a)
        total += c * counts[a]
    return total


def dual(t: Term) -> Term:
    """The constraint equivalent to ``term < bound``, as ``-term >= -bound+1``."""
    if t.bound is None:
        raise CLTLError("dual() needs a full constraint (term with bound)")
    return Term(tuple((-c, a) for c, a in t.monomials), -t.bound + 1)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_SYMBOLS = ["->", ">=", "<=", ">", "<", "(", ")", "[", "]", "{", "}",
            "*", "+", "-", "/", "&", "|", "!", ","]
_KEYWORDS = {"true", "false", "U", "X", "F", "G"}


@dataclass
class _Tok:
    kind: str  # 'int' | 'ident' | 'kw' | symbol itself
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        matched = False
        for sym in _SYMBOLS:
            if text.startswith(sym, i):
                toks.append(_Tok(sym, sym, line, col))
                i += len(sym)
                col += len(sym)
                matched = True
                break
        if matched:
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "kw" if word in _KEYWORDS else "ident"
            toks.append(_Tok(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser (precedence: unary > & > | > -> > U, with U right-associative)
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[_Tok], counters: Optional[set] = None):
        self.toks = toks
        self.pos = 0
        self.counters = counters

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Tok:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(f"expected {kind!r}, found {t.text!r}", t.line, t.col)
        return self.next()

    def error(self, msg: str):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # formula := impl ('U' [subscript] formula)?   (right-associative)
    def formula(self) -> Formula:
        left = self.impl()
        t = self.peek()
        if t.kind == "kw" and t.text == "U":
            self.next()
            sub = self.peek()
            if sub.kind == "[":
                term, bound = self.subscript()
                right = self.formula()
                return Until(left, term, bound, right)
            if sub.kind == "{":
                self.next()
                num = int(self.expect("int").text)
                self.expect("/")
                den = int(self.expect("int").text)
                self.expect("}")
                if den <= 0 or num > den:
                    raise ParseError("frequency must satisfy 0 <= a/b <= 1",
                                     sub.line, sub.col)
                right = self.formula()
                return FreqUntil(left, num, den, right)
            right = self.formula()
            return Until(left, None, 0, right)
        return left

    def impl(self) -> Formula:
        left = self.disj()
        if self.peek().kind == "->":
            self.next()
            return Implies(left, self.impl())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.peek().kind == "|":
            self.next()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.peek().kind == "&":
            self.next()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        t = self.peek()
        if t.kind == "!":
            self.next()
            return Not(self.unary())
        if t.kind == "kw" and t.text == "X":
            self.next()
            return Next(self.unary())
        if t.kind == "kw" and t.text == "G":
            self.next()
            return Globally(self.unary())
        if t.kind == "kw" and t.text == "F":
            self.next()
            if self.peek().kind == "[":
                term, bound = self.subscript()
                return Finally(self.unary(), term, bound)
            return Finally(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        t = self.peek()
        if t.kind == "kw" and t.text == "true":
            self.next()
            return TRUE
        if t.kind == "kw" and t.text == "false":
            self.next()
            return FalseConst()
        if t.kind == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        if t.kind in ("ident", "int", "-"):
            # Either a bare proposition or a counter constraint like
            # "c - 2*d >= 0"; try the constraint first, backtracking on failure.
            save = self.pos
            try:
                return self.guard_constraint()
            except ParseError:
                self.pos = save
            if t.kind == "ident":
                self.next()
                return Atom(t.text)
        self.error(f"expected a formula, found {t.text!r}")

    def guard_constraint(self) -> CounterGuard:
        term = self.linear_term(counter_atoms=True)
        term, bound = self.relation(term)
        if self.counters is not None:
            for a in term.atoms():
                if isinstance(a, str) and a not in self.counters:
                    self.error(f"unknown counter name {a!r}")
        return CounterGuard(term, bound)

    def relation(self, term: Term) -> tuple[Term, int]:
        """Consume a relation symbol and integer bound, normalizing to >=."""
        t = self.peek()
        if t.kind not in (">=", "<=", ">", "<"):
            self.error("expected a relation symbol")
        self.next()
        b = self.signed_int()
        if t.kind == ">=":
            return term, b
        if t.kind == ">":
            return term, b + 1
        if t.kind == "<=":
            return term.negate(), -b
        return term.negate(), -b + 1  # <

    def signed_int(self) -> int:
        neg = False
        if self.peek().kind == "-":
            self.next()
            neg = True
        v = int(self.expect("int").text)
        return -v if neg else v

    def subscript(self) -> tuple[Term, int]:
        """Parse '[' term relop int ']' with formula atoms."""
        self.expect("[")
        term = self.linear_term(counter_atoms=False)
        term, bound = self.relation(term)
        self.expect("]")
        return term, bound

    def linear_term(self, counter_atoms: bool) -> Term:
        monos = [self.monomial(counter_atoms)]
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            c, a = self.monomial(counter_atoms)
            monos.append((-c, a) if op == "-" else (c, a))
        return Term(tuple(monos), None)

    def monomial(self, counter_atoms: bool) -> tuple[int, TermAtom]:
        coef = 1
        if self.peek().kind == "-":
            self.next()
            coef = -1
        if self.peek().kind == "int":
            coef *= int(self.next().text)
            if self.peek().kind == "*":
                self.next()
            else:
                self.error("expected '*' after coefficient")
        return coef, self.term_atom(counter_atoms)

    def term_atom(self, counter_atoms: bool) -> TermAtom:
        t = self.peek()
        if counter_atoms:
            if t.kind != "ident":
                self.error("expected a counter name")
            self.next()
            return t.text
        if t.kind == "ident":
            self.next()
            return Atom(t.text)
        if t.kind == "kw" and t.text in ("true", "false"):
            self.next()
            return TRUE if t.text == "true" else FalseConst()
        if t.kind == "(":
            self.next()
            f = self.formula()
            self.expect(")")
            return f
        self.error("expected a term atom")


def parse_formula(text: str, counters: Optional[set] = None) -> Formula:
    """Parse surface syntax into an AST (sugar preserved; see desugar)."""
    p = _Parser(_tokenize(text), counters)
    f = p.formula()
    t = p.peek()
    if t.kind != "eof":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return f


# ---------------------------------------------------------------------------
# Printer (canonical: explicit coefficients, full parentheses)
# ---------------------------------------------------------------------------

def print_term(t: Term, bound: Optional[int] = None) -> str:
    parts = []
    for idx, (c, a) in enumerate(t.monomials):
        if isinstance(a, str):
            atom = a
        elif isinstance(a, (TrueConst, FalseConst, Atom)):
            atom = print_formula(a)
        else:
            atom = "(" + print_formula(a) + ")"
        if idx == 0:
            parts.append(f"{c}*{atom}")
        elif c < 0:
            parts.append(f"- {-c}*{atom}")
        else:
            parts.append(f"+ {c}*{atom}")
    body = " ".join(parts) if parts else "0*true"
    if bound is None:
        return body
    return f"{body} >= {bound}"


def print_formula(f: Formula) -> str:
    if isinstance(f, TrueConst):
        return "true"
    if isinstance(f, FalseConst):
        return "false"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, CounterGuard):
        return "(" + print_term(f.term, f.bound) + ")"
    if isinstance(f, Not):
        return "!" + _wrap(f.child)
    if isinstance(f, And):
        return "(" + print_formula(f.left) + " & " + print_formula(f.right) + ")"
    if isinstance(f, Or):
        return "(" + print_formula(f.left) + " | " + print_formula(f.right) + ")"
    if isinstance(f, Implies):
        return "(" + print_formula(f.left) + " -> " + print_formula(f.right) + ")"
    if isinstance(f, Next):
        return "X " + _wrap(f.child)
    if isinstance(f, Globally):
        return "G " + _wrap(f.child)
    if isinstance(f, Finally):
        if f.term is None:
            return "F " + _wrap(f.child)
        return f"F[{print_term(f.term, f.bound)}] " + _wrap(f.child)
    if isinstance(f, FreqUntil):
        return ("(" + print_formula(f.left) + " U{%d/%d} " % (f.num, f.den)
                + print_formula(f.right) + ")")
    if isinstance(f, Until):
        if f.term is None:
            mid = " U "
        else:
            mid = f" U[{print_term(f.term, f.bound)}] "
        return "(" + print_formula(f.left) + mid + print_formula(f.right) + ")"
    raise CLTLError(f"unknown formula node {f!r}")


def _wrap(f: Formula) -> str:
    # Binary and until forms already print parenthesized.
    return print_formula(f)
