"""Semantics-preserving WebAssembly obfuscation, similarity, and detection workbench."""

__version__ = "0.1.0"
