"""Flat model checking for counting LTL over counter systems.

The pipeline: parse a counter system (DOT dialect) and a counting LTL
formula, encode the depth-bounded schema search into quantifier-free linear
integer arithmetic, solve with an external SMT solver, then decode and
independently re-verify the witness run.
"""

from .formula import (And, Atom, CounterGuard, Finally, Formula, FreqUntil,
                      Globally, Implies, Next, Not, Or, Term, TrueConst,
                      Until, desugar, dual, parse_formula, print_formula,
                      print_term, subformulae, term_eval)
from .system import (Configuration, CounterSystem, LassoRun, Transition,
                     check_run, is_flat, label_accumulate, parse_dot,
                     print_dot, step, system_to_json)
from .qpa import QpaScript, check_linear, script_size
from .encoder import (EncodingError, encode_aps, encode_consistency,
                      encode_fmc, encode_run, encode_until)
from .smt import (SolverError, SolverVerdict, check, default_solver_command,
                  emit_smtlib, parse_model)
from .witness import (ApsModel, DecodeError, Witness, balance_trace,
                      check_consistency, concretize, decode, validate_run,
                      witness_to_json)
from .oracle import (BudgetError, enumerate_flat_witness, eval_cltl,
                     fa_member, negative_is_stable)
from .cli import (CheckConfig, CheckOutcome, doubling_schedule, main,
                  negate_and_check, run_check)

__version__ = "0.1.0"
