"""Shipped reference data."""
