"""Multi-modal QA in a unified language space: textualize, retrieve, rank, generate."""

__version__ = "0.1.0"
