"""Curvature of spacelike graphs in Euclidean and Lorentz-Minkowski space."""
__version__ = "0.1.0"
