"""Component-segmentation anomaly detection core."""

__version__ = "0.1.0"
