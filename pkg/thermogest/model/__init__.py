"""The network layers, parameters, graphs, and checkpoints."""
