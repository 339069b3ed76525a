"""Exception types raised by the extractor."""


class ExtractionError(Exception):
    """Base class for everything this package raises on purpose."""


class ModelLoadError(ExtractionError):
    """The model identifier or checkpoint path did not yield a usable module."""


class LayerNotLinear(ExtractionError):
    """The model's output is not produced by an affine (nn.Linear) layer."""


class ModeUnsupported(ExtractionError):
    """craft_negatives was asked for a mode it does not implement."""


class DatasetError(ExtractionError):
    """A data split path was missing, unreadable, or the wrong shape."""
