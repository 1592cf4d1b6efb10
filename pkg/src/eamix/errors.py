"""Typed errors; each maps to a distinct CLI exit code and HTTP status."""
from __future__ import annotations


class EamixError(Exception):
    """Base class for all package errors."""


class ConfigError(EamixError):
    """Invalid configuration or parameters (CLI exit code 2)."""


class InfeasibleSizeError(EamixError):
    """Problem size exceeds what the requested mode can materialize (CLI exit code 3)."""


class ComplementarityError(EamixError):
    """A design precondition failed: the operators are not complementary (CLI exit code 4).

    Carries the failing certificate so callers can inspect the violations.
    """

    def __init__(self, message: str, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class TheoremCheckError(EamixError):
    """An internal invariant that must hold mathematically was violated (CLI exit code 5).

    This signals an implementation bug and is never suppressed.
    """
