"""Bundle extraction from trained torch classifiers."""

from .bound import solve_phi_bound
from .data import load_split, save_split, synthetic_images
from .errors import (DatasetError, ExtractionError, LayerNotLinear,
                     ModeUnsupported, ModelLoadError)
from .extract import ExtractionSpec, extract_bundle
from .models import REGISTRY, load_model
from .negatives import MODES, craft_negatives
from .probe import embed_batches, head_arrays, locate_head

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
