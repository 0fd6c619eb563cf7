"""Fair top-K item selection as multi-winner elections."""

__version__ = "0.1.0"
