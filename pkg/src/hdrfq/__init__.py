"""Hierarchical multi-resource fair queueing: schedulers, bounds and a packet simulator."""

__version__ = "0.1.0"
