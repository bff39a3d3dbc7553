"""Evaluation engine for face presentation-attack-detection generalization."""

__version__ = "0.1.0"
