"""markerfit: fit a parametric body model to labeled optical marker data."""

__version__ = "0.1.0"
