"""RFID-driven bandwidth allocation simulator with a 4G comparison baseline."""

__version__ = "0.1.0"
