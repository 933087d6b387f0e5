"""Channel resolvability simulation and bound verification."""

__version__ = "0.1.0"
