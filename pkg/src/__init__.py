# Multi-static ISAC radar simulator and processing toolkit

__version__ = "0.1.0"
