"""Embeddings of inputs the deployed model should distrust.

Detector training needs negatives. Three sources are supported: a
disjoint-label dataset the caller provides, pure pixel noise, and
single-step adversarial perturbations of clean inputs. Whatever the
source, the output is the embedding matrix in the bundle layout's eval
format (little-endian .bin, labels as the model's own predictions on
the written inputs) plus a sidecar JSON describing how the batch was
made.
"""

from __future__ import annotations

import json
import os

import numpy as np
import torch
import torch.nn.functional as F

from . import data, models
from .extract import _DTYPES, _LABEL_DTYPE, ExtractionSpec, resolve_input_shape
from .errors import DatasetError, ModeUnsupported
from .probe import embed_batches, locate_head

MODES = ("ood-dataset", "gaussian-noise", "fgsm-adversarial")


def _fgsm(model, x: torch.Tensor, epsilon: float, batch_size: int,
          device) -> tuple[torch.Tensor, float]:
    """One signed-gradient step away from the model's own prediction.

    Returns the perturbed batch and the fraction whose argmax moved.
    """
    model.eval()
    out, flips, total = [], 0, 0
    for start in range(0, x.shape[0], batch_size):
        batch = x[start:start + batch_size].to(device)
        with torch.no_grad():
            y0 = model(batch).argmax(dim=1)
        probe = batch.clone().requires_grad_(True)
        loss = F.cross_entropy(model(probe), y0)
        grad, = torch.autograd.grad(loss, probe)
        hit = (batch + epsilon * grad.sign()).clamp_(0.0, 1.0)
        with torch.no_grad():
            flips += int((model(hit).argmax(dim=1) != y0).sum())
        total += batch.shape[0]
        out.append(hit.cpu())
    return torch.cat(out), flips / total


def craft_negatives(spec: ExtractionSpec, mode: str,
                    out_dir: str | os.PathLike | None = None) -> str:
    """Write negatives for one mode; returns the eval_x.bin path."""
    if mode not in MODES:
        raise ModeUnsupported(f"mode {mode!r} not in {list(MODES)}")
    device = torch.device(spec.device)
    model = models.load_model(spec.model, spec.seed).to(device)
    pre_x = None
    if spec.eval is not None:
        pre_x, _ = data.load_split(spec.eval)
    shape = resolve_input_shape(spec, pre_x)

    detail: dict = {"mode": mode, "seed": spec.seed}
    if mode == "ood-dataset":
        if pre_x is None:
            raise DatasetError("ood-dataset mode needs an eval split")
        x = pre_x
    elif mode == "gaussian-noise":
        gen = torch.Generator().manual_seed(spec.seed + 3)
        x = (0.5 + 0.25 * torch.randn((spec.n_eval, *shape), generator=gen))
        x = x.clamp_(0.0, 1.0)
        detail["pixel_distribution"] = "normal(0.5, 0.25) clipped to [0, 1]"
    else:
        base = pre_x if pre_x is not None else \
            data.synthetic_images(shape, spec.n_eval, spec.seed + 4)
        head_probe = base[:2].to(device)
        locate_head(model, head_probe)
        x, flip_rate = _fgsm(model, base, spec.fgsm_epsilon,
                             spec.batch_size, device)
        detail["epsilon"] = spec.fgsm_epsilon
        detail["flip_rate"] = flip_rate
    if x.shape[0] < 1:
        raise DatasetError("no negative inputs to embed")

    head = locate_head(model, x[:2].to(device))
    phi, logits = embed_batches(model, head, x, spec.batch_size, device)
    y = logits.argmax(axis=1).astype(np.int64)

    out = os.fspath(out_dir) if out_dir is not None else \
        os.path.join(os.fspath(spec.out_dir), f"negatives-{mode}")
    os.makedirs(out, exist_ok=True)
    dt = _DTYPES[spec.dtype]
    phi.astype(dt).tofile(os.path.join(out, "eval_x.bin"))
    y.astype(_LABEL_DTYPE).tofile(os.path.join(out, "eval_y.bin"))
    detail.update({"count": int(phi.shape[0]), "f": int(phi.shape[1]),
                   "dtype": spec.dtype, "labels": "predicted",
                   "model": spec.model if isinstance(spec.model, str)
                            else type(model).__name__})
    with open(os.path.join(out, "negatives.json"), "w") as fh:
        json.dump(detail, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return os.path.join(out, "eval_x.bin")
