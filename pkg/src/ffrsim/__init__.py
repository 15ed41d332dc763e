"""Stochastic-geometry simulator for power-ratio fractional frequency reuse in dense cellular networks."""

__version__ = "0.1.0"
