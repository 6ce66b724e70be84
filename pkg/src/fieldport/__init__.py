"""Teleportation of one-particle states of a free scalar field."""

__version__ = "0.1.0"
