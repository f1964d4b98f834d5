"""Affine processes on symmetric cones: Jordan algebra kernel, Riccati flows,
Wishart laws and path simulation."""

__version__ = "0.1.0"
