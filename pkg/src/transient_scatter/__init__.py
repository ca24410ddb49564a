"""Gaussian wavepacket collisions with a square barrier."""

__version__ = "0.1.0"
