"""Collective spontaneous emission of dipole-coupled V-type atoms."""

__version__ = "1.0.0"
