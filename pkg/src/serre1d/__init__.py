"""1D well-balanced finite element solver for a relaxed dispersive water wave model."""

__version__ = "0.1.0"
