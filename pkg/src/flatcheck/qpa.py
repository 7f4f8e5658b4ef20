"""Quantifier-free linear integer arithmetic scripts.

Expressions are tagged tuples over integer and boolean sorts:

  integer terms:  int literal | ('v', name) | ('+', t, ...) | ('*', k, t)
                  | ('ite', cond, t, t)
  booleans:       bool literal | ('bv', name) | ('not', b) | ('and', b, ...)
                  | ('or', b, ...) | ('=>', a, b) | ('<=>', a, b)
                  | ('ite', c, a, b) | ('>=' | '<=' | '>' | '<' | '=', t, t)

Scalar multiplication carries a literal integer coefficient, so scripts are
linear by construction; :func:`check_linear` re-verifies structurally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

Expr = Union[bool, int, tuple]


class QpaError(Exception):
    pass


# ---------------------------------------------------------------------------
# Constructors (light constant folding only)
# ---------------------------------------------------------------------------

def var(name: str) -> Expr:
    return ("v", name)


def bvar(name: str) -> Expr:
    return ("bv", name)


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    const = 0
    for t in terms:
        if isinstance(t, int) and not isinstance(t, bool):
            const += t
        elif isinstance(t, tuple) and t[0] == "+":
            flat.extend(t[1:])
        else:
            flat.append(t)
    if const != 0 or not flat:
        flat.append(const)
    if len(flat) == 1:
        return flat[0]
    return ("+", *flat)


def mul(k: int, t: Expr) -> Expr:
    if not isinstance(k, int) or isinstance(k, bool):
        raise QpaError("scalar multiplier must be an integer literal")
    if isinstance(t, int) and not isinstance(t, bool):
        return k * t
    if k == 0:
        return 0
    if k == 1:
        return t
    return ("*", k, t)


def not_(b: Expr) -> Expr:
    if isinstance(b, bool):
        return not b
    if isinstance(b, tuple) and b[0] == "not":
        return b[1]
    return ("not", b)


def and_(*bs: Expr) -> Expr:
    flat: list[Expr] = []
    for b in bs:
        if b is True:
            continue
        if b is False:
            return False
        if isinstance(b, tuple) and b[0] == "and":
            flat.extend(b[1:])
        else:
            flat.append(b)
    if not flat:
        return True
    if len(flat) == 1:
        return flat[0]
    return ("and", *flat)


def or_(*bs: Expr) -> Expr:
    flat: list[Expr] = []
    for b in bs:
        if b is False:
            continue
        if b is True:
            return True
        if isinstance(b, tuple) and b[0] == "or":
            flat.extend(b[1:])
        else:
            flat.append(b)
    if not flat:
        return False
    if len(flat) == 1:
        return flat[0]
    return ("or", *flat)


def implies(a: Expr, b: Expr) -> Expr:
    if a is True:
        return b
    if a is False or b is True:
        return True
    return ("=>", a, b)


def iff(a: Expr, b: Expr) -> Expr:
    if a is True:
        return b
    if b is True:
        return a
    if a is False:
        return not_(b)
    if b is False:
        return not_(a)
    return ("<=>", a, b)


def ite(c: Expr, a: Expr, b: Expr) -> Expr:
    if c is True:
        return a
    if c is False:
        return b
    return ("ite", c, a, b)


def ge(a: Expr, b: Expr) -> Expr:
    return (">=", a, b)


def gt(a: Expr, b: Expr) -> Expr:
    return (">", a, b)


def le(a: Expr, b: Expr) -> Expr:
    return ("<=", a, b)


def lt(a: Expr, b: Expr) -> Expr:
    return ("<", a, b)


def eq(a: Expr, b: Expr) -> Expr:
    return ("=", a, b)


# ---------------------------------------------------------------------------
# Script
# ---------------------------------------------------------------------------

@dataclass
class QpaScript:
    """Declarations plus grouped assertions; deterministic for fixed input."""

    declarations: list[tuple[str, str]] = field(default_factory=list)  # (name, 'int'|'bool')
    assertions: list[tuple[str, Expr]] = field(default_factory=list)   # (group, expr)
    meta: dict = field(default_factory=dict)

    def declare(self, name: str, sort: str) -> None:
        if sort not in ("int", "bool"):
            raise QpaError(f"unknown sort {sort!r}")
        self.declarations.append((name, sort))

    def assert_(self, group: str, expr: Expr) -> None:
        if expr is True:
            return
        self.assertions.append((group, expr))

    def groups(self) -> list[str]:
        out: list[str] = []
        for g, _ in self.assertions:
            if g not in out:
                out.append(g)
        return out


def expr_nodes(e: Expr) -> int:
    if isinstance(e, (bool, int)):
        return 1
    if isinstance(e, tuple):
        if e[0] in ("v", "bv"):
            return 1
        if e[0] == "*":
            return 1 + 1 + expr_nodes(e[2])
        return 1 + sum(expr_nodes(arg) for arg in e[1:])
    raise QpaError(f"bad expression {e!r}")


def script_size(script: QpaScript) -> tuple[int, int]:
    """(declaration count, total assertion node count)."""
    return (len(script.declarations),
            sum(expr_nodes(e) for _, e in script.assertions))


def expr_vars(e: Expr, acc: set) -> None:
    if isinstance(e, tuple):
        if e[0] in ("v", "bv"):
            acc.add(e[1])
            return
        start = 2 if e[0] == "*" else 1
        for arg in e[start:]:
            expr_vars(arg, acc)


def _contains_var(e: Expr) -> bool:
    if isinstance(e, tuple):
        if e[0] in ("v", "bv"):
            return True
        start = 2 if e[0] == "*" else 1
        return any(_contains_var(arg) for arg in e[start:])
    return False


def check_linear(script: QpaScript) -> None:
    """Verify no assertion multiplies two variable-containing terms."""

    def walk(e: Expr) -> None:
        if not isinstance(e, tuple):
            return
        if e[0] in ("v", "bv"):
            return
        if e[0] == "*":
            if not isinstance(e[1], int) or isinstance(e[1], bool):
                raise QpaError(f"nonlinear multiplication in {e!r}")
            walk(e[2])
            return
        for arg in e[1:]:
            walk(arg)

    for _, e in script.assertions:
        walk(e)


def check_well_formed(script: QpaScript) -> None:
    declared = {name for name, _ in script.declarations}
    if len(declared) != len(script.declarations):
        raise QpaError("duplicate declaration")
    used: set = set()
    for _, e in script.assertions:
        expr_vars(e, used)
    undeclared = used - declared
    if undeclared:
        raise QpaError(f"undeclared variables: {sorted(undeclared)[:5]}")


# ---------------------------------------------------------------------------
# Evaluation (used to re-check solver models)
# ---------------------------------------------------------------------------

def eval_expr(e: Expr, model: dict):
    if isinstance(e, (bool, int)):
        return e
    tag = e[0]
    if tag in ("v", "bv"):
        if e[1] not in model:
            raise QpaError(f"model lacks {e[1]!r}")
        return model[e[1]]
    if tag == "+":
        return sum(eval_expr(a, model) for a in e[1:])
    if tag == "*":
        return e[1] * eval_expr(e[2], model)
    if tag == "not":
        return not eval_expr(e[1], model)
    if tag == "and":
        return all(eval_expr(a, model) for a in e[1:])
    if tag == "or":
        return any(eval_expr(a, model) for a in e[1:])
    if tag == "=>":
        return (not eval_expr(e[1], model)) or eval_expr(e[2], model)
    if tag == "<=>":
        return bool(eval_expr(e[1], model)) == bool(eval_expr(e[2], model))
    if tag == "ite":
        return eval_expr(e[2] if eval_expr(e[1], model) else e[3], model)
    if tag == ">=":
        return eval_expr(e[1], model) >= eval_expr(e[2], model)
    if tag == "<=":
        return eval_expr(e[1], model) <= eval_expr(e[2], model)
    if tag == ">":
        return eval_expr(e[1], model) > eval_expr(e[2], model)
    if tag == "<":
        return eval_expr(e[1], model) < eval_expr(e[2], model)
    if tag == "=":
        return eval_expr(e[1], model) == eval_expr(e[2], model)
    raise QpaError(f"bad expression tag {tag!r}")


def failing_assertions(script: QpaScript, model: dict) -> list[tuple[str, Expr]]:
    return [(g, e) for g, e in script.assertions if not eval_expr(e, model)]


def debug_listing(script: QpaScript) -> str:
    """Human-readable constraint listing grouped by assertion family."""
    lines = [f"; declarations: {len(script.declarations)}"]
    for group in script.groups():
        lines.append(f"[{group}]")
        for g, e in script.assertions:
            if g == group:
                lines.append("  " + format_expr(e))
    return "\n".join(lines) + "\n"


def format_expr(e: Expr) -> str:
    if isinstance(e, bool):
        return "true" if e else "false"
    if isinstance(e, int):
        return str(e)
    tag = e[0]
    if tag in ("v", "bv"):
        return e[1]
    if tag == "*":
        return f"{e[1]}*{format_expr(e[2])}"
    args = " ".join(format_expr(a) for a in e[1:])
    return f"({tag} {args})"
