"""Pulse-level simulator and analytic toolkit for ramped geometric phase gates."""

__version__ = "0.1.0"
