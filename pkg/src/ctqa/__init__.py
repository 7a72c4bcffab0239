"""Anatomy-aware agentic engine for 3D chest CT question answering and reporting."""

__version__ = "0.1.0"
