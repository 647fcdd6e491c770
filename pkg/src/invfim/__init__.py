"""Inverse frequent itemset mining: synthesize transaction databases that
approximately match itemset support constraints, and audit them for leaks."""

__version__ = "0.1.0"
