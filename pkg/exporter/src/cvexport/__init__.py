"""Export complex-valued torch checkpoints to the cvexplain model format."""

from .export import ExportBundle, UnsupportedLayerError, export

__version__ = "0.1.0"
__all__ = ["ExportBundle", "UnsupportedLayerError", "export", "__version__"]
