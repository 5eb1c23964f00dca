"""Emotion-imitating speech synthesis pipeline.

Recognize 6-dimensional emotion vectors from speech, compute per-condition
emotion statistics and the affine distribution transform that maps them into
a synthesizer's emotion space, and drive a desk-scale statistical parametric
synthesizer with the transformed vectors.
"""

__version__ = "0.1.0"

from .emotion import DIMENSIONS, EmotionVector

__all__ = ["DIMENSIONS", "EmotionVector", "__version__"]
