"""Render instructions onto canvases and learn a flow from instruction latents to image latents."""

__version__ = "0.1.0"

CATEGORIES = ("C2I", "T2I", "TIE", "TBE", "VME", "DE", "FU", "TU")
