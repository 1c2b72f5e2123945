"""Shared exception types.

DomainError marks a violated precondition or value out of its valid domain;
ShapeError marks mismatched array/grid shapes. Binary-format errors live in
cylocc.formats.
"""


class DomainError(ValueError):
    """A value lies outside the operation's valid domain."""


class ShapeError(ValueError):
    """Array, raster, or grid shapes do not match."""
