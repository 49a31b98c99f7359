"""Adversarial robustness verification and attack synthesis for Markov chains."""

__version__ = "0.1.0"
