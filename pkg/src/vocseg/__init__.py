"""Training-free open-vocabulary image segmentation and recognition."""

__version__ = "0.1.0"
