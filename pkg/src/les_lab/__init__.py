"""Simulation and verification lab for trace fluctuations of random Toeplitz products."""
from __future__ import annotations

__version__ = "0.1.0"
