"""Snapshot entropy: Born sampling and LZ77 entropy estimation."""

__version__ = "0.1.0"
