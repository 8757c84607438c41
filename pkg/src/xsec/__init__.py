"""Equilibrium engine for a two-firm economy with controlling and minority shareholders."""

__version__ = "0.1.0"
