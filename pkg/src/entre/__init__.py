"""Entity-replacement robustness toolkit for relation extraction corpora."""

__version__ = "0.1.0"
