"""figkit: publication-style figures from bohmdiff CSV outputs.

Reads a run's manifest.json plus the CSV files beside it and renders one
of seven figure ids.  Does no computation of its own and never mutates
its inputs; rendering twice with the same style produces byte-identical
images.
"""

__version__ = "0.1.0"

from .errors import EmptyInput, FigkitError, MissingColumn
from .figures import FIGURE_IDS, render

__all__ = ["FIGURE_IDS", "FigkitError", "MissingColumn", "EmptyInput",
           "render", "__version__"]
