import random

import pytest

from flatcheck import (check, check_linear, desugar, emit_smtlib, encode_fmc,
                       parse_dot, parse_formula, script_size)
from flatcheck.encoder import EncodingError
from flatcheck.formula import TRUE, subformulae
from flatcheck.qpa import check_well_formed

from gen import random_core_formula, random_system


def test_depth_below_two_rejected(sys_a):
    with pytest.raises(EncodingError):
        encode_fmc(sys_a, TRUE, 1)


def test_undeclared_guard_counter_rejected(sys_a):
    phi = desugar(parse_formula("F (z >= 1)"))
    with pytest.raises(EncodingError, match="z"):
        encode_fmc(sys_a, phi, 3)


def test_sugar_rejected(sys_a):
    with pytest.raises(EncodingError):
        encode_fmc(sys_a, parse_formula("F p"), 3)


def test_deterministic_bytes(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    a = emit_smtlib(encode_fmc(sys_b, phi, 6))
    b = emit_smtlib(encode_fmc(sys_b, phi, 6))
    assert a == b


def test_linear_and_well_formed_on_random_inputs():
    rng = random.Random(3)
    for _ in range(25):
        system = random_system(rng, max_states=4, guard_prob=0.4)
        phi = random_core_formula(rng, 3, system.counters)
        script = encode_fmc(system, phi, rng.randint(2, 6))
        check_linear(script)
        check_well_formed(script)


def test_closure_coverage_exactly_one_family(sys_b):
    phi = desugar(parse_formula("X (!q U[1*p - 2*q >= 1] (q & p))"))
    script = encode_fmc(sys_b, phi, 5)
    closure = subformulae(phi)
    groups = {g for g, _ in script.assertions}
    # Every consistency family present exactly when the closure demands it.
    assert "consistency-not" in groups
    assert "consistency-and" in groups
    assert "consistency-next" in groups
    assert "consistency-until" in groups
    # Labels pin atoms; the target pins the root.
    names = {name for name, _ in script.declarations}
    for j, f in enumerate(closure):
        assert f"lbl{j}_0" in names


def test_variable_count_matches_layout(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    n = 4
    script = encode_fmc(sys_a, phi, n)
    closure = subformulae(phi)
    untils = [f for f in closure if type(f).__name__ == "Until"]
    (until,) = untils
    monomials = len(until.term.monomials)
    x_args = 0  # no next operator in this formula
    per_pos = (4 + 1            # kind, orig, oend, iters + ebwd
               + 6 * 1          # six per-counter families, one counter
               + len(closure)   # labels
               + x_args
               + (3 + 12 + 2 + 1 + monomials))  # until families
    expected = n * per_pos + (n - 1) + 1  # efwd from position 1; fin flag
    assert len(script.declarations) == expected


def test_size_grows_linearly_in_depth(sys_b):
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    sizes = {}
    for n in (16, 32, 64, 128):
        decls, nodes = script_size(encode_fmc(sys_b, phi, n))
        sizes[n] = decls + nodes
    for n in (16, 32, 64):
        ratio = sizes[2 * n] / sizes[n]
        assert 1.8 <= ratio <= 2.2, (n, ratio)
    assert sizes[16] < sizes[32] < sizes[64] < sizes[128]


def test_forced_two_position_loop(sys_a):
    script = encode_fmc(sys_a, TRUE, 2)
    verdict = check(script)
    assert verdict.is_sat
    assert verdict.model["kind0"] == 1
    assert verdict.model["kind1"] == 3


def test_hand_simulated_valuations_two_positions(sys_a):
    # One two-position loop over the +1 self-loop: first visits 0 and 1, the
    # second visit of the first position is 2, and the limit rises forever.
    verdict = check(encode_fmc(sys_a, TRUE, 2))
    m = verdict.model
    assert m["v1_c_0"] == 0
    assert m["v1_c_1"] == 1
    assert m["v2_c_0"] == 2
    assert m["v2_c_1"] == 3
    assert m["vlk_c_0"] == 1
    assert m["vlk_c_1"] == 1


def test_zero_update_system_fixpoint():
    system = parse_dot('''digraph {
      counters="c";
      s0 [init="true"];
      s0 -> s0;
    }''')
    verdict = check(encode_fmc(system, TRUE, 3))
    m = verdict.model
    for i in range(3):
        assert m[f"v1_c_{i}"] == 0
        if m[f"iters{i}"] == 0:
            assert m[f"vlk_c_{i}"] == 0
            assert m[f"vl_c_{i}"] == 0


def test_unreachable_guard_forces_unsat():
    system = parse_dot('''digraph {
      s0 [init="true", props="p"]; s1 [props="q"];
      s0 -> s1 [guard="c>=5"];
      s0 -> s0;
      s1 -> s1;
    }''')
    phi = desugar(parse_formula("F q"))
    for n in (2, 3, 4, 5):
        assert check(encode_fmc(system, phi, n)).is_unsat


def test_not_true_unsat_everywhere(sys_a, sys_b):
    phi = desugar(parse_formula("false"))
    for system in (sys_a, sys_b):
        for n in (2, 4):
            assert check(encode_fmc(system, phi, n)).is_unsat


def test_regression_growth_witness(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    assert check(encode_fmc(sys_a, phi, 2)).is_unsat
    assert check(encode_fmc(sys_a, phi, 3)).is_unsat
    assert check(encode_fmc(sys_a, phi, 4)).is_unsat
    assert check(encode_fmc(sys_a, phi, 5)).is_sat


def test_extended_values_entail_one_kind(sys_a):
    phi = desugar(parse_formula("F (c >= 3)"))
    script = encode_fmc(sys_a, phi, 5)
    verdict = check(script)
    m = verdict.model
    for name, value in m.items():
        if name.startswith("vlk_") or name.startswith("w") and "k" in name:
            if name.startswith(("wfk", "wlk", "wak", "wabk", "vlk")):
                assert value in (-1, 0, 1), name


def test_parallel_transitions_distinguished_by_selector():
    # Two edges between the same states with different updates; the chosen
    # transition id must drive the valuations.
    system = parse_dot('''digraph {
      s0 [init="true"]; s1 [props="g"];
      s0 -> s1 [update="c+=1"];
      s0 -> s1 [update="c+=5"];
      s1 -> s1;
    }''')
    phi = desugar(parse_formula("F (g & (c >= 5))"))
    verdict = check(encode_fmc(system, phi, 4))
    assert verdict.is_sat
    assert verdict.model["efwd1"] == 1  # only the +5 edge reaches 5


def test_family_slices_partition_the_full_encoding(sys_b):
    from flatcheck import encode_aps, encode_consistency, encode_run
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    full = encode_fmc(sys_b, phi, 4)
    aps = encode_aps(sys_b, phi, 4)
    run = encode_run(sys_b, phi, 4)
    cons = encode_consistency(sys_b, phi, 4)
    assert aps.declarations == full.declarations
    groups = {g for g, _ in full.assertions}
    sliced = {g for part in (aps, run, cons) for g, _ in part.assertions}
    assert groups - sliced == {"target"}
    # The structural slice alone is satisfiable (any schema shape works).
    assert check(aps).is_sat


def test_until_slice_emits_witness_machinery(sys_b):
    from flatcheck import encode_until
    from flatcheck.formula import Until
    phi = desugar(parse_formula("!q U[1*p >= 3] q"))
    (u,) = [f for f in subformulae(phi) if isinstance(f, Until)]
    part = encode_until(sys_b, phi, 4, u)
    assert any(g == "consistency-until" for g, _ in part.assertions)
