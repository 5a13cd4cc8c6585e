"""Numerical toolkit for cofat domains, conformal modulus and packing-conformal maps."""

__version__ = "0.1.0"
