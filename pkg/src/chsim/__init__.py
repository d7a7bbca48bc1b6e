"""Pseudospectral simulator and verification harness for two-component Camassa-Holm systems."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # pragma: no cover -- running from a source tree
    __version__ = "0.1.0"

__all__ = ["__version__"]
