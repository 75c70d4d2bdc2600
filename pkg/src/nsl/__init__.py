"""Neuro-symbolic rule learning workbench.

Converts per-feature classifier predictions into weighted logical examples,
learns an optimal rule set under a combined penalty + length score, and
classifies new inputs probabilistically through the learned rules.
"""

from . import bench, datasets, errors, extractors, learner, logic, probinfer, wcdpi  # noqa: F401

__version__ = "0.1.0"
