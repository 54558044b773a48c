"""Star-rating prediction from the structure of bipartite user-business review graphs."""

__version__ = "0.1.0"
