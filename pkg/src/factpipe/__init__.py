"""factpipe: retrieval-backed correction of factually wrong text-to-image
outputs, with a human choosing the reference image."""

__version__ = "0.1.0"
