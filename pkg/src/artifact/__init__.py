"""Graph-indexed decomposition of U-statistics on row-column exchangeable matrices."""

__version__ = "0.1.0"
