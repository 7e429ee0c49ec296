"""Individual polarization metrics and multi-factor behavioral analysis."""

__version__ = "0.1.0"
