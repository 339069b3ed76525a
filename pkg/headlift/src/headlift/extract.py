"""Turning a trained classifier into an audit bundle on disk.

The output directory follows the auditor's bundle layout: ``meta.json``
declaring shapes and dtype, raw little-endian ``.bin`` matrices for the
head and the embedding splits, and labels as unsigned 32-bit ints. A
``manifest.json`` is written beside them recording the source model and
preprocessing, so bundles stay self-describing; readers of the bundle
format ignore the extra file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
import torch

from . import data, models
from .errors import DatasetError
from .probe import embed_batches, head_arrays, locate_head

FORMAT_VERSION = 1
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_LABEL_DTYPE = np.dtype("<u4")


@dataclass
class ExtractionSpec:
    """Everything one extraction run needs.

    ``model`` is a registry name, a checkpoint path, or a module
    instance. Splits may be .pt paths, (x, y) pairs, dicts, or None to
    synthesize unlabeled uniform-pixel batches. Labels fall back to the
    model's own predictions when a split carries none. The bound-search
    fields configure projected gradient ascent for the pixel-space norm
    bound; ``solve_bound`` folds its result into the bundle metadata.
    """

    model: object
    out_dir: str | os.PathLike
    train: object = None
    eval: object = None
    n_train: int = 512
    n_eval: int = 128
    batch_size: int = 64
    device: str = "cpu"
    seed: int = 0
    input_shape: tuple[int, ...] | None = None
    class_names: list[str] | None = None
    dtype: str = "f32"
    solve_bound: bool = False
    bound_steps: int = 200
    bound_step_size: float = 1.0 / 255.0
    bound_restarts: int = 8
    fgsm_epsilon: float = 8.0 / 255.0


def resolve_input_shape(spec: ExtractionSpec,
                        x: torch.Tensor | None = None) -> tuple[int, ...]:
    if spec.input_shape is not None:
        return tuple(spec.input_shape)
    if isinstance(spec.model, (str, os.PathLike)):
        shape = models.input_shape_for(os.fspath(spec.model))
        if shape is not None:
            return shape
    if x is not None:
        return tuple(x.shape[1:])
    raise DatasetError("input shape unknown: pass input_shape or a data split")


def _resolve_split(source, shape, count, seed):
    """A (x, y-or-None) pair from whatever the spec holds."""
    if source is None:
        if count < 1:
            return None, None
        return data.synthetic_images(shape, count, seed), None
    x, y = data.load_split(source)
    if x.shape[0] < 1:
        raise DatasetError("split is empty")
    return x, y


def _labels(y: torch.Tensor | None, logits: np.ndarray) -> tuple[np.ndarray, str]:
    if y is not None:
        return y.numpy().astype(np.int64), "dataset"
    return logits.argmax(axis=1).astype(np.int64), "predicted"


def extract_bundle(spec: ExtractionSpec) -> str:
    """Write the bundle directory and return its path."""
    if spec.dtype not in _DTYPES:
        raise ValueError(f"dtype {spec.dtype!r} not in {sorted(_DTYPES)}")
    device = torch.device(spec.device)
    model = models.load_model(spec.model, spec.seed).to(device)

    pre_x = pre_y = None
    if spec.train is not None:
        pre_x, pre_y = data.load_split(spec.train)
    shape = resolve_input_shape(spec, pre_x)
    if pre_x is not None:
        train_x, train_y = pre_x, pre_y
    else:
        train_x, train_y = _resolve_split(None, shape, spec.n_train, spec.seed)
    if train_x is None or train_x.shape[0] < 1:
        raise DatasetError("training split is empty")
    eval_x, eval_y = _resolve_split(spec.eval, shape, spec.n_eval, spec.seed + 1)

    head = locate_head(model, train_x[:2].to(device))
    w, b = head_arrays(head)
    n, f = w.shape

    phi_train, logits_train = embed_batches(model, head, train_x,
                                            spec.batch_size, device)
    y_train, train_source = _labels(train_y, logits_train)
    phi_eval = y_eval = None
    eval_source = None
    if eval_x is not None:
        phi_eval, logits_eval = embed_batches(model, head, eval_x,
                                              spec.batch_size, device)
        y_eval, eval_source = _labels(eval_y, logits_eval)

    phi_bound = None
    if spec.solve_bound:
        from .bound import solve_phi_bound
        phi_bound = solve_phi_bound(spec, model=model, head=head, shape=shape)

    names = spec.class_names or [f"class_{i}" for i in range(n)]
    if len(names) != n:
        raise ValueError(f"{len(names)} class names for {n} classes")

    out_dir = os.fspath(spec.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    dt = _DTYPES[spec.dtype]
    meta = {
        "version": FORMAT_VERSION,
        "n": n,
        "f": f,
        "dtype": spec.dtype,
        "class_names": [str(s) for s in names],
        "counts": {"train": int(phi_train.shape[0]),
                   "eval": 0 if phi_eval is None else int(phi_eval.shape[0])},
    }
    if phi_bound is not None:
        meta["phi_l2_bound"] = float(phi_bound)
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    w.astype(dt).tofile(os.path.join(out_dir, "W.bin"))
    b.astype(dt).tofile(os.path.join(out_dir, "b.bin"))
    phi_train.astype(dt).tofile(os.path.join(out_dir, "train_x.bin"))
    y_train.astype(_LABEL_DTYPE).tofile(os.path.join(out_dir, "train_y.bin"))
    if phi_eval is not None:
        phi_eval.astype(dt).tofile(os.path.join(out_dir, "eval_x.bin"))
        y_eval.astype(_LABEL_DTYPE).tofile(os.path.join(out_dir, "eval_y.bin"))

    manifest = {
        "model": spec.model if isinstance(spec.model, str)
                 else type(model).__name__,
        "input_shape": list(shape),
        "preprocessing": {"pixel_range": [0.0, 1.0], "normalization": "none"},
        "labels": {"train": train_source,
                   **({"eval": eval_source} if eval_source else {})},
        "seed": spec.seed,
        "batch_size": spec.batch_size,
        "device": spec.device,
    }
    if phi_bound is not None:
        manifest["phi_l2_bound"] = {
            "value": float(phi_bound),
            "method": "projected gradient ascent",
            "steps": spec.bound_steps,
            "step_size": spec.bound_step_size,
            "restarts": spec.bound_restarts,
            "safety_factor": 1.1,
            # the objective is nonconcave, so this certifies nothing
            # above the best point actually visited
            "heuristic_lower_bound": True,
        }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out_dir
