"""Walkthrough: the logic core.

Parse a small stratified program, ground it, compute its unique answer set,
and double-check the result against the reduct definition.
"""
from nsl.logic import answer_set, ground, parse_atom, parse_program, verify_answer_set

program = parse_program("""
% who gets wet: sprinklers soak the lawn unless it is covered
lawn(front). lawn(back).
covered(back).
wet(L) :- lawn(L), not covered(L).
""")

print("program:")
print(program)
print()

result = answer_set(program)
print("answer set:", sorted(str(a) for a in result))

ok = verify_answer_set(program, frozenset(), result)
print("reduct check confirms the answer set:", ok)

print()
print("grounding of the rule over the two lawns:")
for rule in ground(program).rules:
    if not rule.is_fact:
        print(" ", rule)

# Negation needs stratification; recursion through negation is rejected.
try:
    answer_set(parse_program("p :- not q. q :- not p."))
except Exception as exc:
    print()
    print("unstratified program rejected:", exc)

# Contexts are just extra facts; more facts never remove positive conclusions.
extra = frozenset({parse_atom("lawn(side)")})
bigger = answer_set(program, extra)
assert result <= bigger
print()
print("with an extra lawn:", sorted(str(a) for a in bigger - result), "added")
