"""Delay-tolerant network toolkit: Spray-and-Wait simulation with
random-forest selection of high-quality relay nodes."""

__version__ = "0.1.0"
