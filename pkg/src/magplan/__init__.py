"""Informative path planning over magnetic anomaly maps."""
