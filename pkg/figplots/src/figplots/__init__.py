"""Figure rendering for workload-lattice experiment CSVs."""

from .plots import PlotJob, SchemaError, render

__all__ = ["PlotJob", "SchemaError", "render"]

__version__ = "0.1.0"
