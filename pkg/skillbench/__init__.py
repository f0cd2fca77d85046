"""Desk-scale workbench for selecting robot behavior templates."""

__version__ = "0.1.0"
