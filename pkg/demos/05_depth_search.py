"""
Automatic depth search and counterexamples
==========================================

The driver climbs a doubling depth schedule, stops at the first witness,
optionally refines to the smallest satisfying depth, and can search the
negated property for counterexamples.  The same machinery backs the
`flatcheck` command-line tool.
"""

import json

from flatcheck import (CheckConfig, doubling_schedule, negate_and_check,
                       parse_dot, parse_formula, run_check)

system = parse_dot("""
digraph counterup {
  s0 [props="p", init="true"];
  s0 -> s0 [update="c+=1"];
}
""")

config = CheckConfig(system, parse_formula("F (c >= 3)"),
                     doubling_schedule(2, 16), validate=True,
                     minimize_depth=True)
outcome = run_check(config)
print("verdict:", outcome.verdict, "at depth", outcome.depth,
      "validated:", outcome.validated)
for record in outcome.records:
    print(f"  depth {record.depth}: {record.status} "
          f"({record.seconds:.2f}s, {record.declarations} vars)")

# Machine-readable outcomes round-trip through JSON.
doc = outcome.to_json()
print("witness period:",
      [entry["state"] for entry in doc["witness"]["run"]["period"]])

# Counterexample search: to refute "c stays below 2" find a run of the
# negation.  The witness run is the counterexample.
claim = parse_formula("G (c < 2)")
refuted = negate_and_check(CheckConfig(system, claim,
                                       doubling_schedule(2, 16),
                                       validate=True))
print("claim G (c < 2):",
      "refuted" if refuted.verdict == "sat" else "no counterexample found",
      "(counterexample depth", str(refuted.depth) + ")")

# An unreachable target exhausts the schedule instead.
hopeless = run_check(CheckConfig(system, parse_formula("F q"),
                                 doubling_schedule(2, 8)))
print("F q:", hopeless.verdict, "up to depth", hopeless.max_depth)

# Equivalent command line:
#   flatcheck --system counterup.dot --formula "F (c >= 3)" \
#       --search 2:16 --validate --minimize-depth --json outcome.json
