"""Speech emotion / customer-satisfaction features and classification."""

__version__ = "0.1.0"
