"""Blackstart and load-restoration planning for inverter-fed distribution feeders."""
__version__ = "0.1.0"
