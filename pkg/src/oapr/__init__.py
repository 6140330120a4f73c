"""Open-attribute person retrieval toolkit."""

__version__ = "0.1.0"
