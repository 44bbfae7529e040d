"""Publication-style batch plots from spincorr CSV files."""
from .data import SchemaError, Table, load_table
from .render import FIGURE_KINDS, RenderResult, render

__version__ = "0.1.0"

__all__ = ["FIGURE_KINDS", "RenderResult", "SchemaError", "Table",
           "load_table", "render", "__version__"]
