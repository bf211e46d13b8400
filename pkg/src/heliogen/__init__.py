"""heliogen: magnetogram-to-EUV image translation with conditional GANs."""

__version__ = "0.1.0"
