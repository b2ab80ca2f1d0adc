"""Figure pipeline over jumpfield's published CSV/JSON artifacts."""

from .figures import FigureSpec, EmptyInput, MissingColumn, ReportError, \
    fitted_slope, render

__all__ = ["FigureSpec", "EmptyInput", "MissingColumn", "ReportError",
           "fitted_slope", "render"]
__version__ = "0.1.0"
