"""Sequential multi-arm A/B testing with BIC Bayes factors and partial pooling."""

__version__ = "0.1.0"
