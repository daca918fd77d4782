"""Attention-aided massive MIMO channel estimation laboratory."""

__version__ = "0.1.0"
