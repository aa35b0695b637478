"""Copositivity tests over the PSD cone via a finitely convergent moment hierarchy."""

__version__ = "0.1.0"
