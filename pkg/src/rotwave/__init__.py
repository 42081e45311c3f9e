"""Semiclassical wave packets for rotating Schrödinger / Gross-Pitaevskii equations."""

__version__ = "0.1.0"
