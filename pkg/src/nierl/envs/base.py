"""Shared environment plumbing."""

from __future__ import annotations


class InvalidStateError(RuntimeError):
    """Raised when an environment is stepped from a terminal or foreign state."""


class InvalidConfigError(ValueError):
    """Raised when an environment configuration violates its constraints."""
