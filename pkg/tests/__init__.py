"""Test suite for the RRM engine."""
