"""Clip classification scores and event detection metrics."""
