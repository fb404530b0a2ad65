"""Sparse-message spanning tree / MST protocols over a simulated
asynchronous network, plus the supporting sketch and graph machinery."""

__version__ = "0.1.0"
