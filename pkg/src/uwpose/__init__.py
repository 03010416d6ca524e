"""Underwater visual relocalization toolkit."""

__version__ = "0.1.0"
