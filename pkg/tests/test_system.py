import itertools
import random

import pytest

from flatcheck import (Configuration, check_run, is_flat, label_accumulate,
                       parse_dot, print_dot, step, system_to_json)
from flatcheck.system import LassoRun, ModelError, parse_constraint



def test_parse_dot_smallest(sys_a):
    assert sys_a.states == ("s0",)
    assert sys_a.initial == "s0"
    assert sys_a.labels["s0"] == frozenset({"p"})
    assert sys_a.counters == ("c",)
    (t,) = sys_a.transitions
    assert t.source == t.target == "s0"
    assert t.update_of("c") == 1


def test_parse_dot_requires_initial():
    with pytest.raises(ModelError, match="initial"):
        parse_dot('digraph { s0 [props="p"]; s0 -> s0; }')


def test_parse_dot_guard_attribute():
    system = parse_dot('''digraph {
      s0 [init="true"];
      s0 -> s0 [guard="c-2*d>=0"];
    }''')
    (t,) = system.transitions
    (g,) = t.guards
    assert g.monomials == ((1, "c"), (-2, "d"))
    assert g.bound == 0
    assert set(system.counters) == {"c", "d"}


def test_parse_dot_dangling_edge_rejected():
    # Edges introduce states implicitly, so danglers only arise from the
    # counters declaration path; check undeclared counters instead.
    with pytest.raises(ModelError, match="undeclared"):
        parse_dot('''digraph {
          counters="c";
          s0 [init="true"];
          s0 -> s0 [update="d+=1"];
        }''')


def test_dot_roundtrip_up_to_ids(sys_b):
    again = parse_dot(print_dot(sys_b))
    assert again.states == sys_b.states
    assert again.initial == sys_b.initial
    assert again.labels == sys_b.labels
    assert again.counters == sys_b.counters
    key = lambda t: (t.source, t.target, t.update, t.guards)
    assert sorted(map(key, again.transitions)) == \
        sorted(map(key, sys_b.transitions))


def test_json_export_mentions_everything(sys_b):
    doc = system_to_json(sys_b)
    for token in ("s0", "s1", "initial", "transitions"):
        assert token in doc


def test_successors_and_closure(sys_a, sys_b):
    assert sys_a.successors("s0") == {"s0"}
    assert sys_b.suc_star("s0") == {"s0", "s1"}
    assert sys_b.suc_star("s1") == {"s1"}
    for system in (sys_a, sys_b):
        for s in system.states:
            assert s in system.suc_star(s)
    with pytest.raises(ModelError):
        sys_a.successors("nope")


def test_is_flat_examples(sys_a):
    assert is_flat(sys_a).flat
    diamond = parse_dot('''digraph {
      s [init="true"]; a; b;
      s -> a; a -> s; s -> b; b -> s;
    }''')
    verdict = is_flat(diamond)
    assert not verdict.flat
    assert verdict.state == "s"
    assert verdict.loop_a != verdict.loop_b


def test_is_flat_figure_shape():
    # Two disjoint loops joined by one edge: still flat.
    system = parse_dot('''digraph {
      s0 [init="true"]; s1; s2; s3;
      s0 -> s0; s0 -> s1; s1 -> s2; s2 -> s3; s3 -> s1;
    }''')
    assert is_flat(system).flat


def brute_force_flat(system) -> bool:
    states = list(system.states)
    edges = {(t.source, t.target) for t in system.transitions}
    for start in states:
        loops = set()
        for k in range(1, len(states) + 1):
            for perm in itertools.permutations([s for s in states
                                                if s != start], k - 1):
                seq = (start,) + perm
                if all((seq[i], seq[i + 1]) in edges for i in range(k - 1)) \
                        and (seq[-1], start) in edges:
                    loops.add(seq)
        if len(loops) >= 2:
            return False
    return True


def test_is_flat_matches_bruteforce_on_random_graphs():
    rng = random.Random(5)
    init_attr = '[init="true"]'
    for _ in range(60):
        n = rng.randint(1, 5)
        states = "".join(
            f" s{i} {init_attr if i == 0 else ''};" for i in range(n))
        edges = []
        for i in range(n):
            for j in range(n):
                if rng.random() < 0.3:
                    edges.append(f"s{i} -> s{j};")
        text = "digraph {" + states + " ".join(edges) + "}"
        system = parse_dot(text)
        assert is_flat(system).flat == brute_force_flat(system)


def test_label_accumulate_cases(sys_a):
    labelmap = {s: sys_a.labels[s] for s in sys_a.states}
    assert label_accumulate([], labelmap, domain={"p"}) == {"p": 0}
    counts = label_accumulate(["s0", "s0", "s0"], labelmap, domain={"p", "q"})
    assert counts == {"p": 3, "q": 0}
    with pytest.raises(ModelError):
        label_accumulate(["s0", "missing"],
                         {"s0": {"p"}, "missing": set()},
                         system=sys_a, strict=True)


def test_step_applies_update_then_guard(sys_a):
    cfg = Configuration.make("s0", {"c": 0})
    nxt = step(sys_a, cfg, 0)
    assert nxt.as_dict() == {"c": 1}
    guarded = parse_dot('''digraph {
      s0 [init="true"];
      s0 -> s0 [update="c+=1", guard="c>=1"];
    }''')
    # Guard reads the post-update value, so the first step passes from 0.
    out = step(guarded, Configuration.make("s0", {"c": 0}), 0)
    assert out.as_dict() == {"c": 1}
    blocking = parse_dot('''digraph {
      s0 [init="true"];
      s0 -> s0 [update="c-=1", guard="c>=0"];
    }''')
    with pytest.raises(ModelError, match="guard"):
        step(blocking, Configuration.make("s0", {"c": 0}), 0)


def test_random_executions_respect_run_semantics():
    rng = random.Random(17)
    import sys as _s
    _s.path.insert(0, ".")
    from gen import random_system
    for _ in range(40):
        system = random_system(rng, max_states=4, guard_prob=0.0)
        cfg = Configuration.make(system.initial, system.zero_valuation())
        for _step in range(20):
            outs = system.out_transitions(cfg.state)
            if not outs:
                break
            t = rng.choice(outs)
            nxt = step(system, cfg, t.tid)
            expected = cfg.as_dict()
            for name, k in t.update:
                expected[name] += k
            assert nxt.as_dict() == expected
            assert nxt.state == t.target
            cfg = nxt


def test_check_run_accepts_simple_lasso(sys_a):
    prefix = [Configuration.make("s0", {"c": 0})]
    period = [Configuration.make("s0", {"c": 1}),
              Configuration.make("s0", {"c": 2})]
    run = LassoRun(prefix, period, [0], [0, 0])
    assert check_run(sys_a, run) is None


def test_check_run_rejects_eventually_failing_guard():
    system = parse_dot('''digraph {
      s0 [init="true"];
      s0 -> s0 [update="c-=1", guard="c>=-10"];
    }''')
    period = [Configuration.make("s0", {"c": -1})]
    run = LassoRun([Configuration.make("s0", {"c": 0})], period, [0], [0])
    failure = check_run(system, run)
    assert failure is not None and "drift" in failure


def test_parse_constraint_roundtrip():
    g = parse_constraint("2*c - d >= -1")
    assert g.monomials == ((2, "c"), (-1, "d"))
    assert g.bound == -1
