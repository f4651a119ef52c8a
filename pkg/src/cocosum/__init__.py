"""Code summarization with intra-class and inter-class (UML) context."""

__version__ = "0.1.0"
