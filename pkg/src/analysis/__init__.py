"""Manufactured-solution studies and projectivity analysis."""
