"""Consistency testing toolkit for weak memory models."""

__version__ = "0.1.0"
