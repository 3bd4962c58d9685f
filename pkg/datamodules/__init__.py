"""Per-seed data preparation: one module per data family."""
