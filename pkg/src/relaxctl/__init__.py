"""Mode-selective control of relaxation in open quantum spin chains."""

__version__ = "0.1.0"
