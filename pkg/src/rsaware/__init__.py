"""Reasoning-shortcut analysis for neurosymbolic predictors.

Exact tooling for deciding whether conditionally independent concept models
can represent mixtures over reasoning shortcuts, plus a desk-scale training
harness contrasting independent, joint and autoregressive concept models.
"""

__version__ = "0.1.0"
