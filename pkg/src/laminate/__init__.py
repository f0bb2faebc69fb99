"""p-harmonic / least-gradient duality experiments on flat surfaces."""

__version__ = "0.1.0"
