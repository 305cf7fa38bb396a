"""Embedding extraction and corpus conversion for the cdcoref engine.

This package talks to the engine only through its two documented file
formats (corpus JSON and CDCE embedding binaries); it never imports it.
"""

__version__ = "0.1.0"
