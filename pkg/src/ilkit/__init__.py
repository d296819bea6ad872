"""Interpretability logic toolkit: generalised Veltman semantics, frame
conditions, model transformations, bisimulation and proof checking."""

__version__ = "0.1.0"
