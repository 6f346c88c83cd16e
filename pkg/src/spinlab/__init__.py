"""Exact laboratory for spin-system Markov chains on small graphs."""

__version__ = "0.1.0"
