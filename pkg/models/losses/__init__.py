"""Regularizers and transport losses."""
