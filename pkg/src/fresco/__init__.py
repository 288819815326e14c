"""Fusion of spatially unregistered hyperspectral and multispectral images.

The MSI-region super-resolution image comes from coupled LL1 tensor unmixing
(:mod:`fresco.unmixing`); the HSI-region image from adversarial translation of
abundance patches (:mod:`fresco.adversarial`).
"""

__version__ = "0.0.1"
