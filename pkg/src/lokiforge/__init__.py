"""lokiforge: desk-scale decoder-only LM pretraining."""

__version__ = "0.1.0"
