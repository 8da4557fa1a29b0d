"""Cell-free massive MIMO downlink with differential transmission."""

__version__ = "0.1.0"
