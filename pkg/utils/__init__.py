"""Agent lookup, callbacks, metrics, errors, seeding and JSON helpers."""
