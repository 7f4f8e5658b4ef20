import pytest

from flatcheck import (QpaScript, check, check_linear, emit_smtlib,
                       parse_model, script_size)
from flatcheck.qpa import (add, and_, bvar, debug_listing, eq, eval_expr,
                           failing_assertions, ge, ite, le, mul, not_, or_,
                           var, QpaError, check_well_formed)
from flatcheck.smt import ModelParseError, default_solver_command


def small_script() -> QpaScript:
    sc = QpaScript()
    sc.declare("x", "int")
    sc.declare("b", "bool")
    sc.assert_("demo", eq(var("x"), 3))
    sc.assert_("demo", bvar("b"))
    return sc


def test_emit_empty_script_is_header_and_check():
    sc = QpaScript()
    text = emit_smtlib(sc)
    lines = [l for l in text.splitlines() if l and not l.startswith(";")]
    assert lines[0] == "(set-logic QF_LIA)"
    assert "(check-sat)" in lines
    assert not any(l.startswith("(assert") for l in lines)


def test_emit_negative_literal_unary_minus():
    sc = QpaScript()
    sc.declare("x", "int")
    sc.assert_("demo", eq(var("x"), -2))
    assert "(- 2)" in emit_smtlib(sc)


def test_solver_single_assignment():
    v = check(small_script())
    assert v.is_sat
    assert v.model == {"x": 3, "b": True}


def test_solver_contradiction_unsat():
    sc = QpaScript()
    sc.declare("x", "int")
    sc.assert_("demo", ge(var("x"), 1))
    sc.assert_("demo", le(var("x"), 0))
    assert check(sc).is_unsat


def test_timeout_maps_to_unknown():
    sc = QpaScript()
    for i in range(40):
        sc.declare(f"x{i}", "int")
    # A solvable script, but an effectively zero budget.
    sc.assert_("demo", eq(add(*[var(f"x{i}") for i in range(40)]), 7))
    verdict = check(sc, timeout=0.0001)
    assert verdict.is_unknown
    assert verdict.reason == "timeout"


def test_parse_model_forms():
    sc = QpaScript()
    sc.declare("x", "int")
    sc.declare("y", "int")
    sc.declare("b", "bool")
    text = "((define-fun x () Int 3) (define-fun y () Int (- 2)) " \
           "(define-fun b () Bool true))"
    assert parse_model(text, sc) == {"x": 3, "y": -2, "b": True}
    pairs = "((x 3) (y (- 2)) (b true))"
    assert parse_model(pairs, sc) == {"x": 3, "y": -2, "b": True}


def test_parse_model_missing_variable_is_error():
    sc = QpaScript()
    sc.declare("x", "int")
    sc.declare("y", "int")
    with pytest.raises(ModelParseError, match="y"):
        parse_model("((x 3))", sc)


def test_parse_model_ignores_unknown_names():
    sc = QpaScript()
    sc.declare("x", "int")
    with pytest.warns(UserWarning):
        model = parse_model("((x 3) (zzz 9))", sc)
    assert model == {"x": 3}


def test_evaluator_covers_connectives():
    model = {"x": 2, "b": False}
    assert eval_expr(ite(bvar("b"), 1, add(var("x"), 3)), model) == 5
    assert eval_expr(and_(not_(bvar("b")), ge(var("x"), 2)), model)
    assert eval_expr(or_(bvar("b"), eq(mul(3, var("x")), 6)), model)
    sc = small_script()
    assert failing_assertions(sc, {"x": 3, "b": True}) == []
    assert failing_assertions(sc, {"x": 4, "b": True}) != []


def test_linearity_scan_rejects_variable_products():
    sc = QpaScript()
    sc.declare("x", "int")
    sc.assertions.append(("demo", ("*", ("v", "x"), ("v", "x"))))
    with pytest.raises(QpaError):
        check_linear(sc)


def test_well_formedness_catches_undeclared():
    sc = QpaScript()
    sc.assert_("demo", eq(var("ghost"), 1))
    with pytest.raises(QpaError, match="ghost"):
        check_well_formed(sc)


def test_script_size_counts_and_debug_listing():
    sc = small_script()
    decls, nodes = script_size(sc)
    assert decls == 2
    assert nodes > 0
    listing = debug_listing(sc)
    assert "[demo]" in listing


def test_emitted_text_reparses_as_sexpr():
    from flatcheck.smt import _read_sexprs, _tokenize_sexpr
    text = emit_smtlib(small_script())
    nodes = _read_sexprs(_tokenize_sexpr(text))
    heads = [n[0] for n in nodes if isinstance(n, list)]
    assert "set-logic" in heads
    assert "check-sat" in heads


def test_default_solver_command_resolves():
    assert default_solver_command()
