"""Predict output-distribution degradation of quantum circuits from their structure."""

__version__ = "0.1.0"
