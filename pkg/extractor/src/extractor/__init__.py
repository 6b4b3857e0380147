"""Feature extraction frontend for the clusterbank archive format."""

from .backbone import REGISTRY, StageExtractor
from .dataset import DatasetError, ImageEntry, scan_dataset
from .extract import ExtractSpec, aggregate_reference, extract

__version__ = "0.1.0"

__all__ = [
    "REGISTRY",
    "StageExtractor",
    "DatasetError",
    "ImageEntry",
    "scan_dataset",
    "ExtractSpec",
    "aggregate_reference",
    "extract",
]
