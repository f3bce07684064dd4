"""Desk-scale simulation laboratory for FMCW radar spoofing and its defenses."""

__version__ = "0.1.0"
