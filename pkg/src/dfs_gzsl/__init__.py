"""Diverse feature synthesis for generalized zero-shot learning.

Stage 1 (:mod:`.afg`) aligns semantic and visual features in a shared latent
space; stage 2 (:mod:`.sfg`) learns a conditional VAE there that turns noise
plus a class condition into varied features for unseen classes.
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
