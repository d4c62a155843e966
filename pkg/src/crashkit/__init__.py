"""crashkit: crash-record textualization, baseline evaluation, and what-if analysis."""

__version__ = "0.1.0"
