"""Signed PSD matrix completion on odd-K4 minor free signed graphs."""
from .sgraph import EVEN, ODD, Edge, SignedGraph

__all__ = ["EVEN", "ODD", "Edge", "SignedGraph"]
__version__ = "0.1.0"
