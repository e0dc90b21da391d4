"""Hourly optimal-baseline HVAC energy forecaster with KKT sensitivity."""

__version__ = "0.1.0"
