"""misslab: synthetic tabular data, controlled missingness, imputation, evaluation."""

__version__ = "0.1.0"
