"""Receptive field analysis and cost accounting of the networks."""
