"""SMT-LIB 2 emission and external-solver subprocess driver.

Any solver that reads SMT-LIB 2 from a file argument works; the command is
configurable and can be overridden with the ``FLATCHECK_SOLVER`` environment
variable.  Satisfying models are re-checked against the script by a built-in
evaluator, so solver output is never trusted blindly.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import tempfile
import threading
import time
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .qpa import Expr, QpaScript, failing_assertions

SOLVER_ENV_VAR = "FLATCHECK_SOLVER"


class SolverError(Exception):
    pass


@dataclass
class SolverVerdict:
    status: str  # 'sat' | 'unsat' | 'unknown'
    model: Optional[dict] = None
    reason: Optional[str] = None

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.status == "unsat"

    @property
    def is_unknown(self) -> bool:
        return self.status == "unknown"


# ---------------------------------------------------------------------------
# Emission
# ---------------------------------------------------------------------------

def _sexpr(e: Expr) -> str:
    if isinstance(e, bool):
        return "true" if e else "false"
    if isinstance(e, int):
        return str(e) if e >= 0 else f"(- {-e})"
    tag = e[0]
    if tag in ("v", "bv"):
        return e[1]
    if tag == "+":
        return "(+ " + " ".join(_sexpr(a) for a in e[1:]) + ")"
    if tag == "*":
        return f"(* {_sexpr(e[1])} {_sexpr(e[2])})"
    if tag == "not":
        return f"(not {_sexpr(e[1])})"
    if tag in ("and", "or"):
        return f"({tag} " + " ".join(_sexpr(a) for a in e[1:]) + ")"
    if tag == "=>":
        return f"(=> {_sexpr(e[1])} {_sexpr(e[2])})"
    if tag == "<=>":
        return f"(= {_sexpr(e[1])} {_sexpr(e[2])})"
    if tag == "ite":
        return f"(ite {_sexpr(e[1])} {_sexpr(e[2])} {_sexpr(e[3])})"
    if tag in (">=", "<=", ">", "<", "="):
        return f"({tag} {_sexpr(e[1])} {_sexpr(e[2])})"
    raise SolverError(f"cannot emit expression {e!r}")


def emit_smtlib(script: QpaScript, get_model: bool = True,
                timeout_ms: Optional[int] = None) -> str:
    out = ["(set-logic QF_LIA)"]
    if timeout_ms is not None:
        out.append(f"(set-option :timeout {timeout_ms})")
    for name, sort in script.declarations:
        out.append(f"(declare-fun {name} () {'Int' if sort == 'int' else 'Bool'})")
    group = None
    for g, e in script.assertions:
        if g != group:
            out.append(f"; {g}")
            group = g
        out.append(f"(assert {_sexpr(e)})")
    out.append("(check-sat)")
    if get_model:
        out.append("(get-model)")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Model parsing
# ---------------------------------------------------------------------------

class ModelParseError(SolverError):
    pass


def _tokenize_sexpr(text: str) -> list[str]:
    toks: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in "()":
            toks.append(ch)
            i += 1
        elif ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            toks.append(text[i:j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();":
                j += 1
            toks.append(text[i:j])
            i = j
    return toks


def _read_sexprs(toks: list[str]):
    out = []
    stack = [out]
    for tok in toks:
        if tok == "(":
            node: list = []
            stack[-1].append(node)
            stack.append(node)
        elif tok == ")":
            if len(stack) == 1:
                raise ModelParseError("unbalanced ')'")
            stack.pop()
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ModelParseError("unbalanced '('")
    return out


def _value_of(node) -> object:
    if isinstance(node, list):
        if len(node) == 2 and node[0] == "-":
            return -_value_of(node[1])
        raise ModelParseError(f"unparseable value {node!r}")
    if node == "true":
        return True
    if node == "false":
        return False
    try:
        return int(node)
    except ValueError:
        raise ModelParseError(f"unparseable value {node!r}")


def parse_model(text: str, script: QpaScript) -> dict:
    """Parse a get-model response into a total assignment for the script."""
    nodes = _read_sexprs(_tokenize_sexpr(text))
    entries: dict = {}

    def scan(node) -> None:
        if not isinstance(node, list):
            return
        if len(node) >= 5 and node[0] == "define-fun":
            entries[node[1]] = _value_of(node[4])
            return
        if len(node) == 2 and isinstance(node[0], str) and node[0] not in ("-",):
            # Bare (name value) pair form.
            try:
                entries[node[0]] = _value_of(node[1])
                return
            except ModelParseError:
                pass
        for child in node:
            scan(child)

    for node in nodes:
        scan(node)

    declared = {name: sort for name, sort in script.declarations}
    model: dict = {}
    for name, sort in declared.items():
        if name not in entries:
            raise ModelParseError(f"model is missing variable {name!r}")
        value = entries[name]
        if sort == "int" and not isinstance(value, int):
            raise ModelParseError(f"{name!r} should be an integer, got {value!r}")
        if sort == "bool" and not isinstance(value, bool):
            raise ModelParseError(f"{name!r} should be boolean, got {value!r}")
        model[name] = value
    extra = set(entries) - set(declared)
    if extra:
        warnings.warn(f"solver model names ignored: {sorted(extra)[:5]}")
    return model


# ---------------------------------------------------------------------------
# Solver invocation
# ---------------------------------------------------------------------------

def default_solver_command() -> list[str]:
    env = os.environ.get(SOLVER_ENV_VAR)
    if env:
        return shlex.split(env)
    z3 = shutil.which("z3")
    if z3:
        return [z3]
    node = shutil.which("node")
    wrapper = Path(__file__).resolve().parent / "tools" / "z3cli.js"
    if node and wrapper.exists():
        return [node, str(wrapper)]
    raise SolverError(
        "no SMT solver found: set FLATCHECK_SOLVER, put z3 on PATH, or "
        "install the bundled wrapper's dependency with 'npm install z3-solver'")


def check(script: QpaScript, command: Optional[list[str]] = None,
          timeout: Optional[float] = None,
          cancel: Optional[threading.Event] = None) -> SolverVerdict:
    """Run one solver subprocess on the script and parse its verdict.

    Timeouts and cancellation kill the subprocess and yield Unknown; a
    satisfying model is validated against the declarations and re-checked
    against every assertion before being returned.
    """
    cmd = list(command) if command else default_solver_command()
    timeout_ms = int(timeout * 1000) if timeout is not None else None
    text = emit_smtlib(script, get_model=True, timeout_ms=timeout_ms)
    with tempfile.NamedTemporaryFile("w", suffix=".smt2", delete=False) as handle:
        handle.write(text)
        path = handle.name
    try:
        try:
            proc = subprocess.Popen(cmd + [path], stdout=subprocess.PIPE,
                                    stderr=subprocess.PIPE, text=True)
        except OSError as exc:
            raise SolverError(f"cannot spawn solver {cmd!r}: {exc}") from exc
        try:
            out = _communicate(proc, timeout, cancel)
        except _Timeout:
            return SolverVerdict("unknown", reason="timeout")
        except _Cancelled:
            return SolverVerdict("unknown", reason="cancelled")
        return _interpret(out, proc.returncode, script)
    finally:
        os.unlink(path)


class _Timeout(Exception):
    pass


class _Cancelled(Exception):
    pass


def _communicate(proc: subprocess.Popen, timeout: Optional[float],
                 cancel: Optional[threading.Event]) -> str:
    if cancel is None:
        try:
            out, _ = proc.communicate(timeout=timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.communicate()
            raise _Timeout()
        return out
    deadline = time.monotonic() + timeout if timeout is not None else None
    while True:
        if cancel.is_set():
            proc.kill()
            proc.communicate()
            raise _Cancelled()
        remaining = 0.05
        if deadline is not None:
            remaining = min(remaining, deadline - time.monotonic())
            if remaining <= 0:
                proc.kill()
                proc.communicate()
                raise _Timeout()
        try:
            out, _ = proc.communicate(timeout=max(remaining, 0.01))
            return out
        except subprocess.TimeoutExpired:
            continue


def _interpret(output: str, returncode: int, script: QpaScript) -> SolverVerdict:
    lines = output.strip().splitlines()
    status = lines[0].strip() if lines else ""
    if status == "unsat":
        return SolverVerdict("unsat")
    if status == "unknown":
        return SolverVerdict("unknown", reason="solver-reported")
    if status == "sat":
        rest = "\n".join(lines[1:])
        model = parse_model(rest, script)
        bad = failing_assertions(script, model)
        if bad:
            group, expr = bad[0]
            raise SolverError(
                f"solver model violates emitted assertion in family "
                f"{group!r}: this is a driver or solver defect")
        return SolverVerdict("sat", model=model)
    detail = output.strip()[:400] or f"empty output, exit code {returncode}"
    return SolverVerdict("unknown", reason=f"malformed solver output: {detail}")
