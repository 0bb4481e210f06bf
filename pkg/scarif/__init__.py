"""Embodied and operational carbon modeling for datacenter servers with accelerators."""

__version__ = "0.1.0"
