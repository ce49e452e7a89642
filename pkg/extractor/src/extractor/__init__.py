"""Feature extractor producing `.lluf` files for the llu toolchain."""

__version__ = "0.1.0"
