"""Order/complexity aesthetic measure for symbolic homophony scores."""

__version__ = "0.1.0"
