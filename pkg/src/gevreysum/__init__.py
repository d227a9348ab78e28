"""Formal and summed solutions of a two-time singular Cauchy problem with Gevrey data."""

__version__ = "0.1.0"
