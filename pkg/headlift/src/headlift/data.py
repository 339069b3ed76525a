"""Data splits: .pt files on disk or synthetic pixel batches.

A split file is a ``torch.save``-d dict with key ``"x"`` (N, C, H, W)
and optionally ``"y"`` (N,) integer labels; a bare tensor or an (x, y)
tuple is accepted too. Pixels are expected in [0, 1].
"""

from __future__ import annotations

import os

import torch

from .errors import DatasetError


def synthetic_images(shape: tuple[int, ...], count: int, seed: int) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return torch.rand((count, *shape), generator=gen)


def load_split(source) -> tuple[torch.Tensor, torch.Tensor | None]:
    """Normalize any accepted split form to (x, y-or-None)."""
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if not os.path.exists(path):
            raise DatasetError(f"split file not found: {path}")
        try:
            source = torch.load(path, map_location="cpu", weights_only=True)
        except Exception as exc:
            raise DatasetError(f"cannot read split {path}: {exc}") from exc
    if isinstance(source, dict):
        if "x" not in source:
            raise DatasetError("split dict has no 'x' key")
        x, y = source["x"], source.get("y")
    elif isinstance(source, (tuple, list)) and len(source) == 2:
        x, y = source
    elif torch.is_tensor(source):
        x, y = source, None
    else:
        raise DatasetError(f"unsupported split object: {type(source).__name__}")
    if not torch.is_tensor(x) or x.dim() < 2:
        raise DatasetError("split 'x' must be a batch tensor")
    x = x.float()
    if y is not None:
        if not torch.is_tensor(y):
            y = torch.as_tensor(y)
        if y.shape != (x.shape[0],):
            raise DatasetError(
                f"labels shaped {tuple(y.shape)} for {x.shape[0]} samples")
        y = y.long()
    return x, y


def save_split(path, x: torch.Tensor, y: torch.Tensor | None = None) -> None:
    payload = {"x": x} if y is None else {"x": x, "y": y}
    torch.save(payload, os.fspath(path))
