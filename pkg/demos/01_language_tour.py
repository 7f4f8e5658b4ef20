"""
Tour of the counting-LTL surface language
=========================================

Parsing, desugaring to the six core connectives, subformula closure, and
the small arithmetic of counting terms.
"""

from flatcheck import (desugar, dual, parse_formula, print_formula,
                       subformulae, term_eval)
from flatcheck.formula import Atom, Term, TRUE

# Classic patterns parse as expected; G/F/->/| are sugar.
always = parse_formula("G (req -> F ack)")
print("parsed:   ", print_formula(always))
print("desugared:", print_formula(desugar(always)))

# The counting until bounds a linear combination of subformula occurrences
# before the witness: "acknowledgements never out-run requests by 10".
balanced = parse_formula("G (!reset U[2*e1 - 1*e2 >= -10] reset)")
print("counting: ", print_formula(desugar(balanced)))

# Frequency sugar: "p at at least half the positions before q".
half = parse_formula("p U{1/2} q")
print("frequency:", print_formula(desugar(half)))

# Counter guards talk about the system's counters directly.
guarded = parse_formula("F (c - 2*d >= 0)")
print("guarded:  ", print_formula(desugar(guarded)))

# The closure lists every subformula, children before parents; counting-term
# atoms count as subformulae too.
core = desugar(parse_formula("true U[2*p - 1*true >= 0] q"))
print("closure:")
for f in subformulae(core):
    print("   ", print_formula(f))

# Counting terms evaluate exactly over occurrence counts ...
term = Term(((2, Atom("p")), (-1, TRUE)), None)
print("2*#p - #true over {p: 3, true: 4} =",
      term_eval(term, {Atom("p"): 3, TRUE: 4}))

# ... and every constraint has an exact integer dual: tau < b.
constraint = Term(((2, "x1"), (1, "x2")), 3)      # 2*x1 + x2 >= 3
flipped = dual(constraint)                        # -2*x1 - x2 >= -2
print("dual of 2*x1 + x2 >= 3 is",
      f"{flipped.monomials} >= {flipped.bound}")
for x1 in range(-2, 3):
    for x2 in range(-2, 3):
        counts = {"x1": x1, "x2": x2}
        holds = term_eval(constraint, counts) >= constraint.bound
        holds_dual = term_eval(flipped, counts) >= flipped.bound
        assert holds != holds_dual
print("exactly one of a constraint and its dual holds on every valuation")
