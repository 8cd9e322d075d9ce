"""Bifurcations of symmetric homoclinic orbits in reversible systems."""

__version__ = "0.1.0"
