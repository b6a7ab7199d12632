"""Patch-routed garment deformation: decomposition, retargeting, mask algebra and editing."""

__version__ = "1.0.0"
