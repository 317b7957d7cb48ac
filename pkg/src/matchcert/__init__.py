"""Certified lower bounds for generalized RANKING in the random-arrival,
vertex-weighted online bipartite matching model."""

__version__ = "0.1.0"
