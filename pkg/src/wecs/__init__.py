"""Wavelet energy correlation screening for multi-temporal change detection."""

__version__ = "0.1.0"
