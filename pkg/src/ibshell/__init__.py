"""Energy-based immersed boundary shells with spherical-harmonic surfaces."""

__version__ = "0.1.0"
