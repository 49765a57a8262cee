"""Dataset and report serialization."""
