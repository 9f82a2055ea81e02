"""Figure rendering for simulation summary CSVs."""

from .render import PlotError, PlotSpec, build_figure, plot_regret, read_summary

__version__ = "0.1.0"
