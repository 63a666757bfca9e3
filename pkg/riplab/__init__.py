"""riplab — asymmetric RIP bounds for Gaussian matrices and the phase transitions they imply."""

__version__ = "1.0.0"
