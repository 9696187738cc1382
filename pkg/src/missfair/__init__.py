"""Group-aware missingness simulation, imputation, and fairness auditing."""

__version__ = "0.1.0"
