"""lumitrack: adaptive-lighting face tracking by analysis-by-synthesis."""

__version__ = "0.1.0"
