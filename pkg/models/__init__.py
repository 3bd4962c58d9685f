"""Predictor families, kernels, graph, extrapolation and alignment."""
