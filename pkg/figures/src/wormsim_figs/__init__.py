"""Figure renderer for wormsim experiment CSV outputs."""

from .figures import FIGURE_IDS, FigureSpec, render
from .loader import ALL_SERIES, DataError, Dataset, load_dataset, series_label

__version__ = "0.1.0"

__all__ = [
    "FIGURE_IDS",
    "FigureSpec",
    "render",
    "ALL_SERIES",
    "DataError",
    "Dataset",
    "load_dataset",
    "series_label",
    "__version__",
]
