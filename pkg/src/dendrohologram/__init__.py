"""Dendrogram p-adic encoding of event data and emergent Bohmian diagnostics."""

__version__ = "0.1.0"
