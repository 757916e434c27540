"""Bandit-driven compute allocation across an ensemble of fuzzers."""

__version__ = "0.1.0"
