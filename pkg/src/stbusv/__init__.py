"""Dual-view bus interconnect simulator with a shared verification environment."""
__version__ = "0.1.0"
