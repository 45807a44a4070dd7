"""semnav: zero-shot object-search planning with a deterministic 2D benchmark."""

__version__ = "0.1.0"
