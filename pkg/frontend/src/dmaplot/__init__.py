"""Figure rendering for dmabeam experiment CSV exports."""

from .plots import FIGURE_KINDS, PlotError, PlotSpec, load_spec, render

__all__ = ["FIGURE_KINDS", "PlotError", "PlotSpec", "load_spec", "render"]
