"""Sequential cluster-state preparation: circuits, error propagation, decoding and fits."""

__version__ = "0.1.0"
