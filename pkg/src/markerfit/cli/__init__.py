"""Command-line interface for markerfit."""
