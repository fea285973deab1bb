"""Controllable citation generation: corpus tooling, attribute suggestion,
conditional generation, and evaluation harness."""

__version__ = "0.1.0"
