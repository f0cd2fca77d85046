"""Tests for skillbench."""
