"""Numerical checks of the target-risk bounds and the extrapolation lemmas."""
