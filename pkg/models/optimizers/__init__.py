"""Solvers for the regularized risk minimization problems."""
