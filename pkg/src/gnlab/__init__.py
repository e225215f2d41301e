"""Solitary waves of the Gross-Neveu model: construction, spectra, resolvent, evolution."""
__version__ = "0.1.0"
