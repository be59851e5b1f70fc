"""adrbench: a sim-to-sim benchmark for adaptive domain randomization."""

__version__ = "0.1.0"
