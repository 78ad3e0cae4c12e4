"""Coordination tiers for multi-agent task specs, checked by simulation."""

__version__ = "0.1.0"
