"""Weakly-supervised relative traversability estimation toolkit.

Trains per-pixel traversability regressors from sparse ordinal point-pair
labels (point b more / less / equally traversable than point a), with a
mean-teacher training loop, a human disagreement rate evaluation suite,
a synthetic ground-truth world for end-to-end verification, and an HTTP
annotation service for live labeling.
"""

__version__ = "0.1.0"
