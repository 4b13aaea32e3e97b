"""Extração de relações com supervisão distante."""

__version__ = "0.1.0"
