"""Render hypergrad experiment CSVs into figure files.

Strictly a consumer: this package reads the CSV tables the `hypergrad`
commands write and draws them.  It never imports the experiment code and
performs no statistics of its own.
"""

from .errors import FigureError, SchemaError
from .render import KINDS, FigureSpec, render, render_lines, render_matrix, render_point_grid
from .tables import read_matrix, read_table

__all__ = [
    "FigureError",
    "SchemaError",
    "KINDS",
    "FigureSpec",
    "render",
    "render_lines",
    "render_matrix",
    "render_point_grid",
    "read_matrix",
    "read_table",
]
