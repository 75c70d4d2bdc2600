"""Walkthrough: probabilistic classification through learned rules.

At run time each feature prediction is a distribution over values (an
annotated disjunction).  The probability a board is invalid is the total
weight of joint value assignments under which some rule fires.
"""
from nsl.datasets import sudoku_background
from nsl.logic import Atom, parse_program
from nsl.probinfer import (AnnotatedSlot, classify_prob, export_problog,
                           prob_support_prune)

rules = parse_program("""
invalid :- digit(C1,V), digit(C2,V), same_row(C1,C2), C1 != C2.
invalid :- digit(C1,V), digit(C2,V), same_col(C1,C2), C1 != C2.
invalid :- digit(C1,V), digit(C2,V), same_block(C1,C2), C1 != C2.
""").rules
background = sudoku_background()

# c1 is probably a 2; c2 (same row) is certainly a 2.
slots = [
    AnnotatedSlot("digit", ("c1",), ((2, 0.6), (3, 0.4))),
    AnnotatedSlot("digit", ("c2",), ((2, 1.0),)),
]
dist = classify_prob(rules, background, slots, "binary",
                     ["invalid", "valid"], positive_label="invalid")
print(f"p(invalid) = {dist.probs['invalid']:.3f}   "
      f"p(valid) = {dist.probs['valid']:.3f}   -> {dist.predicted}")

# Pruning tiny support values keeps exact inference tractable; the error is
# bounded by the dropped mass.
noisy = AnnotatedSlot("digit", ("c6",),
                      ((1, 0.97), (2, 0.012), (3, 0.012), (4, 0.006)))
pruned = prob_support_prune(noisy, epsilon=0.02)
print(f"pruned slot keeps {len(pruned.support)} of {len(noisy.support)} values, "
      f"dropped mass {pruned.dropped_mass:.3f}")

# Monte Carlo fallback for large joint supports, seeded for reproducibility.
wide = [AnnotatedSlot("digit", (f"c{i + 1}",),
                      tuple((v, 0.1) for v in range(10))) for i in range(8)]
est = classify_prob(rules, background, wide, "binary", ["invalid", "valid"],
                    positive_label="invalid", exact_cap=10 ** 5,
                    mc=True, mc_samples=50_000, seed=7)
print(f"wide-board estimate: p(invalid) = {est.probs['invalid']:.3f} "
      f"({est.method}, {est.samples} samples)")

# The same inputs export as a ProbLog-dialect program for external checking.
print()
print(export_problog(rules, background, slots, queries=[Atom("invalid")])
      .splitlines()[0])
print("   ... (rules, background facts, annotated disjunctions, queries)")
