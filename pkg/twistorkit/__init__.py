"""Twistor-space curvature engine: decompositions, Nijenhuis tensors, verdicts."""

__version__ = "0.1.0"
