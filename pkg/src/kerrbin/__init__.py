"""Binomial-code simulator for a driven Kerr resonator."""

__version__ = "0.1.0"
