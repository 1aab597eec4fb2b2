"""Noise-robust speech synthesis on self-supervised representations."""

__version__ = "0.1.0"
