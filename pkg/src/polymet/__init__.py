"""polymet: numerical differential geometry on coordinate charts."""

__version__ = "0.1.0"
