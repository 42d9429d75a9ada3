"""Classificação incremental temporalmente consistente em cadeias de Markov absorventes."""

__version__ = "0.1.0"
