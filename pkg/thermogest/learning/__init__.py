"""Losses, decoders, the optimizer, and the training procedure."""
