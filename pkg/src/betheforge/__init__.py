"""Bethe ansatz toolkit for L0-regular gl(2) spin chains."""

__version__ = "0.1.0"
