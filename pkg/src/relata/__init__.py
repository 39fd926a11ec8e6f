"""Relational word-pair embeddings: NLRA, LRA and vector-offset baselines."""

__version__ = "0.1.0"
