"""INT8 quantization of a hologram-generating CNN, with optics and metrics for checking it."""

__version__ = "0.1.0"
