"""Models, optimizers and a simulator for SSD garbage collection."""

__version__ = "0.1.0"
