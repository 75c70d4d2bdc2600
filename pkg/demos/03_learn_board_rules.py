"""Walkthrough: learning the no-duplicate rules of 4x4 boards.

Builds a training fold with a perfect extractor, enumerates the hypothesis
space from the language bias, and runs the exact search.  The learned rules
fire on a board exactly when two equal values share a row, column, or block.
"""
import time

from nsl import extractors as ex
from nsl.bench import accuracy, build_task, cached_candidates, gt_predict
from nsl.datasets import generate_sudoku_dataset
from nsl.learner import fire_matrix, interpretability, learn_optimal

boards = generate_sudoku_dataset(60, 60, seed=ex.stable_seed(0, "sudoku-data"))
bundle = build_task(boards, fold=0, fraction=0.0,
                    profile=ex.PROFILES["perfect"], seed=0)
print(f"training examples: {len(bundle.task.examples)}, "
      f"held-out: {len(bundle.gt_test)}")

t0 = time.time()
candidates = cached_candidates(bundle.task.bias, bundle.task.background)
print(f"hypothesis space: {len(candidates)} canonical rules "
      f"({time.time() - t0:.1f}s)")

table = fire_matrix(candidates, bundle.task.examples, bundle.task.background)
hypothesis = learn_optimal(bundle.task, candidates=candidates, table=table)

print()
print("optimal hypothesis "
      f"(score {hypothesis.score}, {interpretability(hypothesis)} literals):")
print(hypothesis.text)

predictions = [gt_predict(hypothesis.rules, bundle.task.background, case.context,
                          bundle.mode, bundle.labels, bundle.positive_label,
                          bundle.encode_label)
               for case in bundle.gt_test]
acc = accuracy(predictions, [case.label for case in bundle.gt_test])
print()
print(f"held-out accuracy on true symbolic boards: {acc:.3f}")
