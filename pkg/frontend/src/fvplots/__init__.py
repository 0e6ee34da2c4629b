"""Static figures from fvsim CSV artifacts."""

from .render import FIGURE_KINDS, FigureRequest, SchemaError, render

__all__ = ["FIGURE_KINDS", "FigureRequest", "SchemaError", "render"]
__version__ = "0.1.0"
