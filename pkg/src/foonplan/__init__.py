"""Build and validate FOON task graphs from cooking-video plans."""

__version__ = "0.1.0"
