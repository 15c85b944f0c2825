"""Thermal clips: synthesis, storage, datasets, and preprocessing."""
