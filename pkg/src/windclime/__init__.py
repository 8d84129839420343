"""Wind-hazard storm classification and mixed-climate design wind speeds."""

__version__ = "0.1.0"
