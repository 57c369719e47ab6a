"""lenstheta: exact two-loop weights of lens spaces from solid-torus gluing."""

__version__ = "0.1.0"
