"""Maximum likelihood estimation for totally positive binary distributions and Ising models."""

__version__ = "0.1.0"
