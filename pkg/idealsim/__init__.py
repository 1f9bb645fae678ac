"""Decentralized optimization simulator: IDEAL, MIDEAL and their baselines."""

__version__ = "0.1.0"
