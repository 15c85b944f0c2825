"""The configuration for py.test."""
