import pytest

from flatcheck import (Configuration, balance_trace, check, check_consistency,
                       concretize, decode, desugar, encode_fmc,
                       label_accumulate, parse_dot, parse_formula,
                       subformulae, term_eval, validate_run, witness_to_json)
from flatcheck.formula import Atom, Not, Until, TRUE
from flatcheck.system import LassoRun
from flatcheck.witness import (ApsModel, ApsPosition, DecodeError,
                               format_trace)


def solve_and_decode(system, phi, n):
    verdict = check(encode_fmc(system, phi, n))
    assert verdict.is_sat
    aps = decode(verdict.model, system, phi, n)
    return aps, concretize(aps, system)


def test_decode_sys_a_witness(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    aps, witness = solve_and_decode(sys_a, phi, 5)
    assert all(p.origin == "s0" for p in aps.positions)
    b, e = aps.last_loop
    assert e == 4
    assert aps.positions[b].iters == 0
    # The replayed lasso climbs by one forever.
    values = [witness.run.config_at(i).value("c") for i in range(6)]
    assert values == [0, 1, 2, 3, 4, 5]
    assert validate_run(sys_a, witness.run, phi)


def test_decode_rejects_unopened_loop(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    verdict = check(encode_fmc(sys_a, phi, 5))
    bad = dict(verdict.model)
    bad["kind0"] = 2  # inside a loop that never began
    with pytest.raises(DecodeError, match="loop not opened"):
        decode(bad, sys_a, phi, 5)


def test_decode_rejects_wrong_initial_origin(sys_b):
    phi = desugar(parse_formula("F q"))
    verdict = check(encode_fmc(sys_b, phi, 4))
    bad = dict(verdict.model)
    bad["orig0"] = 1  # s1 is not the initial state
    with pytest.raises(DecodeError, match="initial"):
        decode(bad, sys_b, phi, 4)


def test_decode_rejects_tampered_iteration_counts(sys_b):
    phi = desugar(parse_formula("F q"))
    verdict = check(encode_fmc(sys_b, phi, 4))
    bad = dict(verdict.model)
    bad["iters3"] = 1  # the final loop must carry the forever marker 0
    with pytest.raises(DecodeError):
        decode(bad, sys_b, phi, 4)


def test_concretize_loop_repetition_counts(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    verdict = check(encode_fmc(sys_b, phi, 5))
    aps = decode(verdict.model, sys_b, phi, 5)
    witness = concretize(aps, sys_b)
    for (b, e) in aps.loops[:-1]:
        count = aps.positions[b].iters
        width = e - b + 1
        occurrences = sum(1 for sp in witness.schema_pos[:len(witness.run.prefix)]
                          if b <= sp <= e)
        assert occurrences == count * width
    # Exactly one period copy is materialized.
    lb, le = aps.last_loop
    assert len(witness.run.period) == le - lb + 1


def test_cross_check_detects_valuation_tampering(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    verdict = check(encode_fmc(sys_a, phi, 5))
    bad = dict(verdict.model)
    bad["v1_c_1"] += 1
    with pytest.raises(DecodeError, match="valuation|transition|guard"):
        aps = decode(bad, sys_a, phi, 5)
        concretize(aps, sys_a)


def test_validate_run_flags_guard_violation():
    system = parse_dot('''digraph {
      s0 [init="true"];
      s0 -> s0 [update="c+=1", guard="c>=1"];
    }''')
    good = LassoRun([], [Configuration.make("s0", {"c": 0})], [], [0])
    assert validate_run(system, good, TRUE)
    # Tampered valuation breaks the replay.
    bad = LassoRun([], [Configuration.make("s0", {"c": -5})], [], [0])
    assert not validate_run(system, bad, TRUE)


def test_validate_run_wrong_system(sys_a, sys_b):
    run = LassoRun([], [Configuration.make("sX", {})], [], [0])
    assert not validate_run(sys_b, run, TRUE)


def test_consistency_passes_on_solver_witnesses(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    aps, witness = solve_and_decode(sys_b, phi, 5)
    report = check_consistency(aps, phi, sys_b, witness)
    assert report.all_passed
    closure_at_zero = [f for f in aps.closure if f in aps.positions[0].labels]
    for f in closure_at_zero:
        assert report.result(0, f)


def _handmade_schema(sys_b, phi, labelled_at_zero: bool) -> ApsModel:
    """Rows s0 s0 then the q loop; only two p positions precede any q."""
    closure = desugar(phi)
    u = closure
    assert isinstance(u, Until)
    chi, q, p = u.left, Atom("q"), Atom("p")
    no_counters = {}

    def pos(kind, origin, labels, iters, efwd, ebwd):
        return ApsPosition(kind, origin, frozenset(labels), iters, efwd,
                           ebwd, dict(no_counters), dict(no_counters), {}, {})

    zero_labels = {TRUE, p, chi}
    if labelled_at_zero:
        zero_labels.add(u)
    positions = [
        pos(0, "s0", zero_labels, 1, None, None),
        pos(0, "s0", {TRUE, p, chi}, 1, 0, None),
        pos(1, "s1", {TRUE, q}, 0, 1, 2),
        pos(3, "s1", {TRUE, q}, 0, 2, None),
    ]
    return ApsModel(4, positions, [(2, 3)], subformulae(u), u)


def test_handmade_underfunded_witness_fails_d2(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    aps = _handmade_schema(sys_b, phi, labelled_at_zero=True)
    report = check_consistency(aps, phi, sys_b)
    # Only two p positions exist before the q loop: the best balance value is
    # 2 < 3, so claiming the until at position 0 must fail.
    assert not report.result(0, phi)
    failing = [e for e in report.failures()
               if e.position == 0 and e.formula == phi]
    assert failing and failing[0].clause == "until-witness-value"


def test_handmade_unlabelled_witness_passes(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    aps = _handmade_schema(sys_b, phi, labelled_at_zero=False)
    report = check_consistency(aps, phi, sys_b)
    assert report.result(0, phi)


def test_position_labelled_p_and_not_p_fails_boolean_clause(sys_b):
    phi = desugar(parse_formula("!p | p"))  # closure contains p and !p
    verdict = check(encode_fmc(sys_b, phi, 4))
    aps = decode(verdict.model, sys_b, phi, 4)
    notp = next(f for f in aps.closure
                if isinstance(f, Not) and f.child == Atom("p"))
    broken = aps.positions[0].labels | {notp, Atom("p")}
    aps.positions[0] = ApsPosition(
        aps.positions[0].kind, aps.positions[0].origin, frozenset(broken),
        aps.positions[0].iters, aps.positions[0].edge_fwd,
        aps.positions[0].edge_bwd, aps.positions[0].val_first,
        aps.positions[0].val_second, aps.positions[0].val_last_kind,
        aps.positions[0].val_last_pay)
    report = check_consistency(aps, phi, sys_b)
    bad = [e for e in report.failures() if e.position == 0]
    assert any(e.clause in ("boolean-negation", "proposition") for e in bad)


def test_balance_trace_matches_label_accumulation(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    aps, witness = solve_and_decode(sys_b, phi, 5)
    (u,) = [f for f in aps.closure if isinstance(f, Until)]
    labelmap = {i: aps.positions[i].labels for i in range(aps.n)}
    for anchor in range(3):
        trace = balance_trace(witness, u, anchor, 6)
        assert trace[0] == 0
        for j in range(1, 7):
            segment = [witness.schema_position_at(anchor + k)
                       for k in range(j)]
            counts = label_accumulate(segment, labelmap,
                                      domain=set(u.term.atoms()))
            assert trace[j] == term_eval(u.term, counts)


def test_witness_json_and_trace(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    aps, witness = solve_and_decode(sys_a, phi, 5)
    report = check_consistency(aps, phi, sys_a, witness)
    doc = witness_to_json(witness, sys_a, report)
    assert doc["depth"] == 5
    assert doc["consistency"]["all_passed"]
    assert doc["run"]["period"]
    assert any(v == "+inf" for p in doc["positions"]
               for v in p["val_last"].values())
    text = format_trace(witness)
    assert "period repeats forever" in text


def test_decoded_state_projection_fits_schema_budget(sys_b):
    from flatcheck import fa_member
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    aps, witness = solve_and_decode(sys_b, phi, 5)
    prefix_states = [c.state for c in witness.run.prefix]
    period_states = [c.state for c in witness.run.period]
    assert fa_member(prefix_states, period_states, aps.n)
