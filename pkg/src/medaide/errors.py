"""Shared exception base for the package."""


class MedaideError(Exception):
    """Base class for all errors raised by medaide modules."""
