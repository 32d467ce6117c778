"""Distributed beamforming relay unicast on wireless grids and random placements."""
from __future__ import annotations

__version__ = "0.1.0"
