"""Serve pretrained relation/NER models behind the oracle wire protocol."""

__version__ = "0.1.0"
