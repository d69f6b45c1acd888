"""Chern-connection calculus and continuity-equation numerics for Hermitian metrics."""

from .fields import HermitianField, NotPositiveDefinite, PeriodicGrid, PointSet, SphereCells

__all__ = ["HermitianField", "NotPositiveDefinite", "PeriodicGrid", "PointSet", "SphereCells"]
__version__ = "0.1.0"
