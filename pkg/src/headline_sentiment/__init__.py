"""Financial-headline sentiment regression with lexicon-augmented 1D CNN ensembles."""

__version__ = "0.1.0"
