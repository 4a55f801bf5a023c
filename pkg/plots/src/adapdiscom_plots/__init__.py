"""Figure rendering for simulation results tables."""

from .render import RenderError, load_rows, make_figure, render

__version__ = "0.1.0"
