"""Reading and writing model bundles.

A bundle is a directory holding one linear classification head plus the
training embeddings it was fitted on and an optional evaluation set.
``meta.json`` declares shapes, dtype, and class names; each matrix lives in
a raw little-endian row-major ``.bin`` file beside it. A ``.csv`` fallback
(one row per sample, single header line carrying the column count) is
accepted on read for matrices up to 10**6 entries. Whatever the on-disk
dtype, everything is float64 once loaded.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import (AuditError, BundleReadError, MissingClass, MissingFile,
                     NonFiniteValue, ShapeMismatch, VersionUnsupported)

FORMAT_VERSION = 1
CSV_MAX_ENTRIES = 10 ** 6

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_LABEL_DTYPE = np.dtype("<u4")


@dataclass
class ModelHead:
    """Final-layer weights (n, f), bias (n,), and the class-name mapping.

    Class ids are the contiguous indices into ``class_names``.
    """

    weights: np.ndarray
    bias: np.ndarray
    class_names: list[str]

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


@dataclass
class EmbeddingSet:
    """A matrix of embeddings (N, f) with optional integer labels (N,)."""

    x: np.ndarray
    y: np.ndarray | None = None

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass
class ModelBundle:
    head: ModelHead
    train: EmbeddingSet
    eval: EmbeddingSet | None = None
    phi_l2_bound: float | None = None
    dtype: str = "f32"


@dataclass
class Violation:
    """One validation failure: which field broke which rule."""

    field: str
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule} ({self.detail})"


_RULE_ERRORS = {
    "missing": MissingFile,
    "shape": ShapeMismatch,
    "finite": NonFiniteValue,
    "class-coverage": MissingClass,
    "version": VersionUnsupported,
    "parse": BundleReadError,
}


def _read_matrix(path: str, name: str, shape: tuple, dtype: np.dtype,
                 violations: list) -> np.ndarray | None:
    """Load name.bin (exact byte count) or the CSV fallback."""
    bin_path = os.path.join(path, name + ".bin")
    csv_path = os.path.join(path, name + ".csv")
    n_entries = int(np.prod(shape))
    if os.path.exists(bin_path):
        expected = n_entries * dtype.itemsize
        actual = os.path.getsize(bin_path)
        if actual != expected:
            violations.append(Violation(
                name, "shape",
                f"declared {shape} needs {expected} bytes, file has {actual}"))
            return None
        data = np.fromfile(bin_path, dtype=dtype)
        return data.reshape(shape)
    if os.path.exists(csv_path):
        if n_entries > CSV_MAX_ENTRIES:
            violations.append(Violation(
                name, "shape",
                f"csv fallback capped at {CSV_MAX_ENTRIES} entries, need {n_entries}"))
            return None
        try:
            with open(csv_path) as fh:
                header = fh.readline().strip()
                body = np.loadtxt(fh, delimiter=",", dtype=np.float64, ndmin=2)
        except (OSError, ValueError) as exc:
            violations.append(Violation(name, "parse", str(exc)))
            return None
        cols = shape[1] if len(shape) == 2 else 1
        if header != str(cols):
            violations.append(Violation(
                name, "parse", f"csv header {header!r} != column count {cols}"))
            return None
        if body.size != n_entries:
            violations.append(Violation(
                name, "shape", f"csv holds {body.size} entries, declared {n_entries}"))
            return None
        return body.reshape(shape).astype(dtype.base)
    violations.append(Violation(name, "missing", f"neither {name}.bin nor {name}.csv"))
    return None


def _collect(path: str) -> tuple[ModelBundle | None, list]:
    violations: list[Violation] = []
    meta_path = os.path.join(path, "meta.json")
    if not os.path.isdir(path):
        return None, [Violation("bundle", "missing", f"no such directory: {path}")]
    if not os.path.exists(meta_path):
        return None, [Violation("meta.json", "missing", "meta.json not found")]
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        return None, [Violation("meta.json", "parse", str(exc))]

    version = meta.get("version")
    if version != FORMAT_VERSION:
        return None, [Violation("meta.json", "version",
                                f"version {version!r}, supported: {FORMAT_VERSION}")]

    for key in ("n", "f", "dtype", "class_names", "counts"):
        if key not in meta:
            violations.append(Violation("meta.json", "parse", f"missing key {key!r}"))
    if violations:
        return None, violations

    n, f = meta["n"], meta["f"]
    dtype_tag = meta["dtype"]
    if dtype_tag not in _DTYPES:
        return None, [Violation("meta.json", "parse",
                                f"dtype {dtype_tag!r} not in {sorted(_DTYPES)}")]
    dtype = _DTYPES[dtype_tag]
    if not (isinstance(n, int) and isinstance(f, int) and n >= 2 and f >= 1):
        return None, [Violation("meta.json", "shape", f"bad dims n={n!r} f={f!r}")]
    names = meta["class_names"]
    if len(names) != n:
        violations.append(Violation("class_names", "shape",
                                    f"{len(names)} names for n={n}"))
    counts = meta["counts"]
    n_train = counts.get("train", 0)
    n_eval = counts.get("eval", 0)
    if n_train < 1:
        violations.append(Violation("counts.train", "shape", "no training samples"))
        return None, violations

    w = _read_matrix(path, "W", (n, f), dtype, violations)
    b = _read_matrix(path, "b", (n,), dtype, violations)
    train_x = _read_matrix(path, "train_x", (n_train, f), dtype, violations)
    train_y = _read_matrix(path, "train_y", (n_train,), _LABEL_DTYPE, violations)
    eval_x = eval_y = None
    if n_eval > 0:
        eval_x = _read_matrix(path, "eval_x", (n_eval, f), dtype, violations)
        if os.path.exists(os.path.join(path, "eval_y.bin")) or \
           os.path.exists(os.path.join(path, "eval_y.csv")):
            eval_y = _read_matrix(path, "eval_y", (n_eval,), _LABEL_DTYPE, violations)
    if violations:
        return None, violations

    for name, arr in (("W", w), ("b", b), ("train_x", train_x), ("eval_x", eval_x)):
        if arr is not None and not np.all(np.isfinite(arr)):
            violations.append(Violation(name, "finite", "non-finite entries"))
    labels = train_y.astype(np.int64)
    if labels.size and labels.max(initial=0) >= n:
        violations.append(Violation(
            "train_y", "shape", f"label {labels.max()} out of range for n={n}"))
    else:
        present = np.bincount(labels, minlength=n)
        missing = np.flatnonzero(present == 0)
        if missing.size:
            violations.append(Violation(
                "train_y", "class-coverage",
                f"classes with zero training points: {missing.tolist()}"))
    if eval_y is not None and eval_y.size and int(eval_y.max()) >= n:
        violations.append(Violation(
            "eval_y", "shape", f"label {int(eval_y.max())} out of range for n={n}"))
    if violations:
        return None, violations

    phi_bound = meta.get("phi_l2_bound")
    if phi_bound is not None:
        phi_bound = float(phi_bound)
        if not np.isfinite(phi_bound) or phi_bound <= 0:
            return None, [Violation("phi_l2_bound", "finite", f"bad bound {phi_bound}")]

    head = ModelHead(w.astype(np.float64), b.astype(np.float64), [str(s) for s in names])
    train = EmbeddingSet(train_x.astype(np.float64), labels.astype(np.uint32))
    ev = None
    if eval_x is not None:
        ev = EmbeddingSet(eval_x.astype(np.float64),
                          None if eval_y is None else eval_y.astype(np.uint32))
    return ModelBundle(head, train, ev, phi_bound, dtype_tag), violations


def validate_bundle(path: str) -> list:
    """Check a bundle directory and return every violation found."""
    _, violations = _collect(path)
    return violations


def load_bundle(path: str) -> ModelBundle:
    """Load a bundle, raising the first violation as a typed exception."""
    bundle, violations = _collect(path)
    if violations:
        first = violations[0]
        raise _RULE_ERRORS.get(first.rule, AuditError)(str(first))
    return bundle


def save_bundle(bundle: ModelBundle, path: str, dtype: str | None = None) -> None:
    """Write a bundle directory. Matrices go out as .bin in the given dtype."""
    tag = dtype or bundle.dtype
    if tag not in _DTYPES:
        raise ValueError(f"dtype {tag!r} not in {sorted(_DTYPES)}")
    dt = _DTYPES[tag]
    os.makedirs(path, exist_ok=True)
    head = bundle.head
    meta = {
        "version": FORMAT_VERSION,
        "n": head.n_classes,
        "f": head.n_features,
        "dtype": tag,
        "class_names": list(head.class_names),
        "counts": {"train": len(bundle.train),
                   "eval": 0 if bundle.eval is None else len(bundle.eval)},
    }
    if bundle.phi_l2_bound is not None:
        meta["phi_l2_bound"] = float(bundle.phi_l2_bound)
    with open(os.path.join(path, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    head.weights.astype(dt).tofile(os.path.join(path, "W.bin"))
    head.bias.astype(dt).tofile(os.path.join(path, "b.bin"))
    bundle.train.x.astype(dt).tofile(os.path.join(path, "train_x.bin"))
    bundle.train.y.astype(_LABEL_DTYPE).tofile(os.path.join(path, "train_y.bin"))
    if bundle.eval is not None:
        bundle.eval.x.astype(dt).tofile(os.path.join(path, "eval_x.bin"))
        if bundle.eval.y is not None:
            bundle.eval.y.astype(_LABEL_DTYPE).tofile(os.path.join(path, "eval_y.bin"))
