"""
The exhaustive oracle: enumerating flat run shapes
==================================================

Ground truth for small systems: enumerate runs of shape
u0 v0^k0 ... um vm^omega, evaluate the formula exactly on each lasso, and
decide counting untils beyond any finite window by a growth argument.
"""

from flatcheck import (desugar, enumerate_flat_witness, eval_cltl, fa_member,
                       parse_dot, parse_formula)

system = parse_dot("""
digraph grow {
  s0 [props="p", init="true"];
  s0 -> s0 [update="c+=1"];
}
""")

# The only run loops forever on s0, pushing c upward: 0, 1, 2, ...
phi = desugar(parse_formula("F (c >= 3)"))
run = enumerate_flat_witness(system, max_schema_len=4, max_iter=8, phi=phi)
print("witness found:", run is not None)
print("first values of c:", [run.config_at(i).value("c") for i in range(6)])

# Exact lasso evaluation handles guards that stabilize after a few copies of
# the period ...
print("F (c >= 3):", eval_cltl(system, run, phi))
print("G (c < 3): ",
      eval_cltl(system, run, desugar(parse_formula("G (c < 3)"))))

# ... and counting thresholds far beyond any reasonable window: the count of
# p grows by one per period, so even a million is eventually reached.
huge = desugar(parse_formula("true U[1*p >= 1000000] p"))
print("count reaches 10^6:", eval_cltl(system, run, huge))

# While a shrinking count never recovers.
never = desugar(parse_formula("true U[-1*p >= 1] p"))
print("negative drift reaches 1:", eval_cltl(system, run, never))

# Shape membership: which schema budgets admit a given lasso?  Iterating
# the s0 block compresses the prefix into one budget unit.
print("s0 s0 s0 (s1 s2)^w fits budget 3:",
      fa_member(["s0", "s0", "s0"], ["s1", "s2"], 3))
print("same at budget 2:",
      fa_member(["s0", "s0", "s0"], ["s1", "s2"], 2))
