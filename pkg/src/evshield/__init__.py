"""EV-fleet feedback defense against load-altering attacks on power grids."""

__version__ = "0.1.0"
