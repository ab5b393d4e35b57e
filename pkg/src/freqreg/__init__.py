"""Two-stage frequency-security screening and dispatch regulation."""

__version__ = "0.1.0"
