"""Deterministic discrete-event simulator of 802.11b-style medium access."""

__version__ = "0.1.0"
