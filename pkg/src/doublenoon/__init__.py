"""Simulation toolkit for double NOON state generation in circuit QED."""

__version__ = "0.1.0"
