"""
Counter systems in the DOT dialect
==================================

Reading a guarded counter system, checking flatness, and replaying steps.
"""

from flatcheck import (Configuration, is_flat, parse_dot, print_dot, step,
                       system_to_json)

# Nodes declare propositions and the initial state; edges carry counter
# updates and guards (evaluated after the update).
TEXT = """
digraph workers {
  idle [props="ready", init="true"];
  busy [props="working"];
  idle -> busy [update="jobs+=1"];
  busy -> busy [update="done+=1", guard="jobs-done>=0"];
  busy -> idle [guard="done-jobs>=0"];
  idle -> idle;
}
"""

system = parse_dot(TEXT)
print("states:  ", system.states)
print("counters:", system.counters)
print("initial: ", system.initial)

# The canonical printer round-trips the model.
print(print_dot(system))

# Flatness: every state starts at most one simple loop.  Here 'idle' starts
# both the self-loop and the idle->busy->idle cycle, so the system is not
# flat; the checker names the offending state and two loops.
verdict = is_flat(system)
print("flat:", verdict.flat)
if not verdict.flat:
    print("  state", verdict.state, "starts", verdict.loop_a,
          "and", verdict.loop_b)

# A flat variant: drop the return edge.
flat = parse_dot("""
digraph pipeline {
  a [init="true"]; b;
  a -> a [update="c+=1"];
  a -> b;
  b -> b [guard="c>=1"];
}
""")
print("pipeline flat:", bool(is_flat(flat)))
print("suc*(a) =", sorted(flat.suc_star("a")))

# Stepping respects the run semantics: update first, then guards.
cfg = Configuration.make("a", flat.zero_valuation())
cfg = step(flat, cfg, 0)   # a -> a bumps c
cfg = step(flat, cfg, 1)   # a -> b
cfg = step(flat, cfg, 2)   # b -> b needs c >= 1, satisfied
print("after three steps:", cfg.state, cfg.as_dict())

# A JSON export is available for debugging and tooling.
print(system_to_json(flat))
