"""Driven elliptical quantum billiards: spectra, resonance prediction, propagation."""

__version__ = "0.1.0"
