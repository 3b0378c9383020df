"""Cycle-level simulator of a unified DRAM-cache and NVM memory controller."""

__version__ = "0.1.0"
