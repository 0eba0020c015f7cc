"""Exceptions shared across modules."""


class DimensionMismatch(ValueError):
    """Vector or matrix dimensions do not line up."""
