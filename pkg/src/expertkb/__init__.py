"""Consent-governed capture, retrieval, and evaluation of expert knowledge."""

__version__ = "0.1.0"
