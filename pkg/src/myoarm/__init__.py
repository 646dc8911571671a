"""myoarm: tendon-driven planar arm simulation with data-driven iterative learning control."""

__version__ = "0.1.0"
