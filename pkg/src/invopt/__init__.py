"""Inverse optimal control: closed-form optimal feedback for nonlinear systems."""

__version__ = "0.1.0"
