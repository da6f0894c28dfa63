"""Legal event timeline extraction with iterative critique and refinement."""

__version__ = "0.1.0"
