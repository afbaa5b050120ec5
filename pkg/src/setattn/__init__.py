"""Permutation-invariant attention encoders for reinforcement learning over object sets."""

__version__ = "0.1.0"
