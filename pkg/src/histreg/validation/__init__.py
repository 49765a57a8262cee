"""Dataset validation."""
