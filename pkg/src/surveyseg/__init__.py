"""surveyseg: mixed-type survey segmentation toolkit."""

__version__ = "0.1.0"

from . import assoc, cluster, evaluate, graph, ingest, numerics, reduce  # noqa: E402,F401
