"""Walkthrough: from classifier outputs to weighted examples.

Each labelled input turns into a weighted context-dependent example: the
predicted feature values become context facts, and the minimum prediction
confidence (scaled by 100 and floored) becomes the penalty a hypothesis
pays for not covering the example.
"""
import io

from nsl.wcdpi import (AggregatorConfig, FeaturePrediction, aggregate,
                       format_example, generate_example, read_examples,
                       write_examples)

cfg = AggregatorConfig(scale=100)

# The aggregation is min-based: one unconfident feature drags the whole
# example's weight down.
print("confident example:  ", aggregate([0.99, 0.98, 0.97], cfg))
print("one shaky feature:  ", aggregate([0.99, 0.35, 0.97], cfg))
print("floor clamps to >=1:", aggregate([0.004], cfg))
print()

# A binary board example: two cells predicted, one shared row.
predictions = [
    FeaturePrediction(2, "digit", ("c1",), y_conf=0.92),
    FeaturePrediction(2, "digit", ("c5",), y_conf=0.80),
]
example = generate_example("board7", predictions, "invalid",
                           {"valid", "invalid"}, cfg,
                           mode="binary", positive_label="invalid")
print("serialized example:")
print(" ", format_example(example))

# A multiclass example includes one label and excludes the rest.
zoo_preds = [FeaturePrediction(1, "milk", (), 0.99),
             FeaturePrediction(4, "legs", (), 0.97)]
from nsl.logic import Atom
animal = generate_example("aardvark", zoo_preds, "mammal",
                          {"mammal", "bird", "fish"}, cfg,
                          encode_label=lambda l: Atom("class", (l,)))
print(" ", format_example(animal))
print()

# Files round-trip exactly.
buf = io.StringIO()
write_examples([example, animal], buf)
back = read_examples(io.StringIO(buf.getvalue()))
assert back == [example, animal]
print("file round trip: ok")
