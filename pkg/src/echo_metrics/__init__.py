"""Polarization and echo-chamber statistics for two-narrative comment data."""

__version__ = "0.1.0"

CLASSES = ("conspiracy_polarized", "not_polarized", "science_polarized")
