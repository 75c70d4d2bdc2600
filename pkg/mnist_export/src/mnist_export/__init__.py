"""Digit-classifier prediction exporter.

Trains (once) and runs two fixed-weight digit classifiers, a softmax CNN
and an evidential variant, optionally rotating images 90 degrees clockwise,
and writes probability-vector records in the nsl prediction-file format.
"""

__version__ = "0.1.0"
