"""Numerical workbench for Chern-Weil forms, Thom forms and differential characters."""

__version__ = "0.1.0"
