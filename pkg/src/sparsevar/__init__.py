"""Sparse AR/VAR estimation with lag-structured lasso penalties for realized-variance forecasting."""

__version__ = "0.1.0"
