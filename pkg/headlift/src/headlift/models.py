"""Built-in model fixtures and checkpoint loading.

The registry holds small deterministic architectures used for pipeline
tests and for shape-faithful stand-ins of published backbones. Every
entry ends in a plain ``nn.Linear`` head whose input is the embedding
the extractor captures. ``load_model`` also accepts a filesystem path to
a ``torch.save``-d module, or an ``nn.Module`` instance passed through
unchanged.
"""

from __future__ import annotations

import os

import torch
from torch import nn

from .errors import ModelLoadError


def _toy_cnn() -> nn.Module:
    # 16x16 RGB in, 16-dim embedding, 10 classes.
    return nn.Sequential(
        nn.Conv2d(3, 8, 3, padding=1),
        nn.ReLU(),
        nn.MaxPool2d(2),
        nn.Conv2d(8, 16, 3, padding=1),
        nn.ReLU(),
        nn.AdaptiveAvgPool2d(1),
        nn.Flatten(),
        nn.Linear(16, 10),
    )


def _swin_class() -> nn.Module:
    """Patch-embed style stack matching the published head shape.

    Not a transformer; what matters downstream is that the penultimate
    layer is 1536-wide and the head covers 1000 classes, so bundles
    produced from it exercise the full-size metadata path.
    """
    return nn.Sequential(
        nn.Conv2d(3, 96, kernel_size=4, stride=4),
        nn.GELU(),
        nn.Conv2d(96, 1536, kernel_size=8),
        nn.GELU(),
        nn.Flatten(),
        nn.Linear(1536, 1000),
    )


def _identity() -> nn.Module:
    # Embedding == flattened pixels; the analytic norm maximum over
    # [0,1]^d is sqrt(d) at the all-ones image.
    return nn.Sequential(
        nn.Flatten(),
        nn.Linear(48, 10),
    )


def _zero() -> nn.Module:
    body = nn.Linear(48, 8)
    with torch.no_grad():
        body.weight.zero_()
        body.bias.zero_()
    return nn.Sequential(nn.Flatten(), body, nn.Linear(8, 4))


# name -> (builder, input shape the model expects)
REGISTRY = {
    "toy-cnn": (_toy_cnn, (3, 16, 16)),
    "swin-class": (_swin_class, (3, 32, 32)),
    "identity": (_identity, (3, 4, 4)),
    "zero": (_zero, (3, 4, 4)),
}


def input_shape_for(name: str) -> tuple[int, ...] | None:
    entry = REGISTRY.get(str(name))
    return entry[1] if entry else None


def load_model(model, seed: int = 0) -> nn.Module:
    """Resolve a registry name, checkpoint path, or module instance.

    Registry builds are seeded so repeated loads give identical weights.
    """
    if isinstance(model, nn.Module):
        return model.eval()
    name = os.fspath(model) if not isinstance(model, str) else model
    if name in REGISTRY:
        builder, _ = REGISTRY[name]
        torch.manual_seed(seed)
        return builder().eval()
    if os.path.exists(name):
        try:
            loaded = torch.load(name, map_location="cpu", weights_only=False)
        except Exception as exc:
            raise ModelLoadError(f"cannot load checkpoint {name}: {exc}") from exc
        if not isinstance(loaded, nn.Module):
            raise ModelLoadError(
                f"checkpoint {name} holds {type(loaded).__name__}, not a module")
        return loaded.eval()
    raise ModelLoadError(
        f"{name!r} is neither a registry entry {sorted(REGISTRY)} nor a file")
