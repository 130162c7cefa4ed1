"""Figure rendering for aoisim metrics files."""

__version__ = "0.1.0"
