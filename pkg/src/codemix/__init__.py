"""Code-mixed tweet sentiment analysis with a from-scratch miniature BERT."""

__version__ = "0.1.0"
