"""Similarity-gated policy transfer for soft actor-critic on 2D racing tasks."""

__version__ = "0.1.0"
