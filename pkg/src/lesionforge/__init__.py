"""Lesion segmentation from superpixel-seeded unsupervised clustering and Q-learning mask selection."""

__version__ = "0.1.0"
