"""Extubation-failure prediction from multi-rate ICU time series."""

__version__ = "0.1.0"
